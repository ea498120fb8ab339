"""wildtraj - классификация видов животных по суточным GPS-траекториям"""

__version__ = "0.1.0"

# Основные классы для удобного импорта
from .core import DailySequence, FeatureSet, FixRecord, SplitManifest, WildtrajError
from .utils.config import RunConfig
from .utils.pipeline import Stage, StageChain
