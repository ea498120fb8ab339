"""Веса классов и взвешенная функция потерь"""

from typing import Optional

import numpy as np

from ..core.errors import SplitError
from ..engine.ops import cross_entropy, log_softmax
from ..engine.tensor import Tensor


def compute_class_weights(labels: np.ndarray, num_classes: int = 2) -> np.ndarray:
    """
    Веса, обратно пропорциональные частотам: w_c = N / (K * N_c)

    Args:
        labels: Метки обучающей выборки
        num_classes: Число классов K

    Returns:
        np.ndarray: Веса (K,)

    Raises:
        SplitError: Один из классов отсутствует в обучающей выборке
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=num_classes)[:num_classes]
    if (counts == 0).any():
        raise SplitError(f"Class(es) {np.flatnonzero(counts == 0).tolist()} absent from the "
                         f"training set (counts {counts.tolist()}), cannot train this task")
    return labels.size / (num_classes * counts.astype(np.float64))


def weighted_cross_entropy(logits: Tensor, labels: np.ndarray,
                           class_weights: Optional[np.ndarray] = None) -> Tensor:
    """sum_i w_{y_i} * (-log p_{y_i}) / sum_i w_{y_i}"""
    return cross_entropy(logits, labels, class_weights)


def weighted_cross_entropy_np(logits: np.ndarray, labels: np.ndarray,
                              class_weights: Optional[np.ndarray] = None) -> float:
    """То же значение без ленты, в float64 (для валидации)"""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        return float("nan")
    logp = log_softmax(np.asarray(logits, dtype=np.float64))
    weights = (np.ones(logits.shape[1]) if class_weights is None
               else np.asarray(class_weights, dtype=np.float64))
    w = weights[labels]
    return float(-(w * logp[np.arange(labels.size), labels]).sum() / w.sum())
