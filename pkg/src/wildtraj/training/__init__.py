from .losses import compute_class_weights, weighted_cross_entropy
from .optim import AdamW, EarlyStopping, ReduceLROnPlateau, clip_grad_norm
from .trainer import FitResult, History, Trainer, TrainingData, fit, write_history_csv

__all__ = [
    "AdamW",
    "EarlyStopping",
    "FitResult",
    "History",
    "ReduceLROnPlateau",
    "Trainer",
    "TrainingData",
    "clip_grad_norm",
    "compute_class_weights",
    "fit",
    "weighted_cross_entropy",
    "write_history_csv",
]
