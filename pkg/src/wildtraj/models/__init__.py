from .base_model import Module, ModelMetadata, Parameter, SequenceClassifier
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .cnn1d import CNN1DClassifier
from .lstm import LSTMClassifier
from .registry import ModelRegistry, create_model, register_model, registry
from .tcn import TCNClassifier
from .transformer import TransformerClassifier

__all__ = [
    "CNN1DClassifier",
    "Checkpoint",
    "LSTMClassifier",
    "Module",
    "ModelMetadata",
    "ModelRegistry",
    "Parameter",
    "SequenceClassifier",
    "TCNClassifier",
    "TransformerClassifier",
    "create_model",
    "load_checkpoint",
    "register_model",
    "save_checkpoint",
    "registry",
]
