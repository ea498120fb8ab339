"""Метрики бинарной и многоклассовой классификации суток"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix as sk_confusion_matrix

from ..utils.logging import setup_logger

logger = setup_logger(__name__)


def confusion_matrix(labels: Sequence[int], predictions: Sequence[int],
                     num_classes: int = 2) -> np.ndarray:
    """Матрица K x K: строки - истинный класс, столбцы - предсказанный"""
    labels = np.asarray(labels, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if labels.size == 0:
        return np.zeros((num_classes, num_classes), dtype=np.int64)
    return sk_confusion_matrix(labels, predictions, labels=list(range(num_classes))).astype(np.int64)


@dataclass
class BalancedAccuracy:
    value: float
    excluded_classes: List[int] = field(default_factory=list)


def balanced_accuracy_detail(cm: np.ndarray) -> BalancedAccuracy:
    """
    Среднее по классам значение полноты.

    Классы без примеров (нулевая строка) исключаются из среднего и
    возвращаются в excluded_classes.
    """
    cm = np.asarray(cm, dtype=np.float64)
    support = cm.sum(axis=1)
    present = support > 0
    excluded = np.flatnonzero(~present).tolist()
    if excluded:
        logger.warning("Classes %s have zero support, excluded from balanced accuracy", excluded)
    if not present.any():
        return BalancedAccuracy(float("nan"), excluded)
    recalls = np.diag(cm)[present] / support[present]
    return BalancedAccuracy(float(recalls.mean()), excluded)


def balanced_accuracy(cm: np.ndarray) -> float:
    return balanced_accuracy_detail(cm).value


def f1_positive(cm: np.ndarray, positive: int = 1) -> float:
    """F1 положительного класса; 0, если precision + recall = 0"""
    cm = np.asarray(cm, dtype=np.float64)
    tp = cm[positive, positive]
    fp = cm[:, positive].sum() - tp
    fn = cm[positive, :].sum() - tp
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return float(2.0 * precision * recall / (precision + recall))


def _check_binary(scores: Sequence[float], labels: Sequence[int]):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} differ in shape")
    return scores, labels


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """
    Площадь под ROC-кривой в форме Манна-Уитни по средним рангам.

    Числитель 2U = 2 * sum(ранги положительных) - n1 * (n1 + 1) - целое число,
    поэтому результат совпадает с попарным подсчётом до бита.

    Returns:
        Optional[float]: None, если в метках один класс
    """
    scores, labels = _check_binary(scores, labels)
    n_pos = int((labels == 1).sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        logger.warning("ROC AUC undefined: only one class among %d labels", labels.size)
        return None
    ranks = pd.Series(scores).rank(method="average").to_numpy()
    twice_u = int(round(2.0 * ranks[labels == 1].sum())) - n_pos * (n_pos + 1)
    return twice_u / (2 * n_pos * n_neg)


def roc_auc_pairs(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """Попарный подсчёт O(n^2): победа 1, ничья 1/2"""
    scores, labels = _check_binary(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels != 1]
    if pos.size == 0 or neg.size == 0:
        return None
    wins = int((pos[:, None] > neg[None, :]).sum())
    ties = int((pos[:, None] == neg[None, :]).sum())
    return (2 * wins + ties) / (2 * pos.size * neg.size)
