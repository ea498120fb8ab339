"""AdamW, ограничение нормы градиента, планировщик шага и ранняя остановка"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..engine.tensor import Tensor
from ..utils.logging import setup_logger

logger = setup_logger(__name__)


class AdamW:
    """
    Adam с развязанным затуханием весов.

    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * theta,
    где затухание считается от theta до шага.
    """

    def __init__(self, params: Sequence[Tensor], lr: float = 3e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 1e-4):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.exp_avg = [np.zeros_like(p.data) for p in self.params]
        self.exp_avg_sq = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        bias1 = 1.0 - self.beta1 ** self.step_count
        bias2 = 1.0 - self.beta2 ** self.step_count
        for p, m, v in zip(self.params, self.exp_avg, self.exp_avg_sq):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            adaptive = self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            decay = self.lr * self.weight_decay * p.data
            p.data = (p.data - adaptive - decay).astype(p.data.dtype)


def global_grad_norm(params: Sequence[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad, dtype=np.float64)))
    return math.sqrt(total)


def clip_grad_norm(params: Sequence[Tensor], max_norm: float) -> float:
    """
    Масштабирует градиенты так, чтобы глобальная L2-норма не превышала max_norm

    Returns:
        float: Норма до ограничения
    """
    norm = global_grad_norm(params)
    if math.isfinite(norm) and norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * scale).astype(p.grad.dtype)
    return norm


class ReduceLROnPlateau:
    """
    Уменьшает шаг в factor раз после patience эпох подряд без улучшения.

    Улучшение: value < best - threshold. После снижения счётчик сбрасывается;
    шаг не опускается ниже min_lr.
    """

    def __init__(self, optimizer: AdamW, factor: float = 0.5, patience: int = 2,
                 min_lr: float = 1e-5, threshold: float = 1e-5):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = math.inf
        self.num_bad_epochs = 0

    def step(self, value: float) -> bool:
        """Returns: True если шаг уменьшен"""
        if value < self.best - self.threshold:
            self.best = value
            self.num_bad_epochs = 0
            return False
        self.num_bad_epochs += 1
        if self.num_bad_epochs < self.patience:
            return False
        self.num_bad_epochs = 0
        new_lr = max(self.optimizer.lr * self.factor, self.min_lr)
        if new_lr < self.optimizer.lr:
            logger.info("Reducing learning rate %.3e -> %.3e", self.optimizer.lr, new_lr)
            self.optimizer.lr = new_lr
            return True
        return False


class EarlyStopping:
    """Остановка после patience эпох подряд без улучшения"""

    def __init__(self, patience: int = 6, threshold: float = 1e-5):
        self.patience = patience
        self.threshold = threshold
        self.best = math.inf
        self.best_epoch: Optional[int] = None
        self.num_bad_epochs = 0
        self.history: List[float] = []

    def step(self, value: float, epoch: int) -> bool:
        """
        Args:
            value: Значение метрики (валидационная потеря)
            epoch: Номер эпохи

        Returns:
            bool: True если значение улучшилось
        """
        self.history.append(value)
        if value < self.best - self.threshold:
            self.best = value
            self.best_epoch = epoch
            self.num_bad_epochs = 0
            return True
        self.num_bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.num_bad_epochs >= self.patience
