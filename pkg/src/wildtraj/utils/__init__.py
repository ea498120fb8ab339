from .config import ModelConfig, RunConfig, TrainConfig
from .logging import init_logging, setup_logger
from .pipeline import RunContext, Stage, StageChain
from .timezone import get_timezone

__all__ = [
    'ModelConfig',
    'RunConfig',
    'RunContext',
    'Stage',
    'StageChain',
    'TrainConfig',
    'get_timezone',
    'init_logging',
    'setup_logger',
]
