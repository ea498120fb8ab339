"""Цикл обучения с валидацией, планировщиком и ранней остановкой"""

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd

from ..core.errors import TrainingDivergedError
from ..models.base_model import SequenceClassifier
from ..utils.config import TrainConfig
from ..utils.logging import setup_logger
from .losses import compute_class_weights, weighted_cross_entropy_np
from .optim import AdamW, EarlyStopping, ReduceLROnPlateau, clip_grad_norm, global_grad_norm

logger = setup_logger(__name__)

HISTORY_COLUMNS = ["epoch", "train_loss", "val_loss", "lr", "seconds"]


@dataclass
class TrainingData:
    """Входы модели и метки: x (N, T, F), mask (N, T), labels (N,)"""
    x: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.x.shape[0])

    def batch(self, indices: np.ndarray) -> "TrainingData":
        return TrainingData(self.x[indices], self.mask[indices], self.labels[indices])


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    seconds: float = 0.0


@dataclass
class History:
    """
    История обучения.

    Attributes:
        records: По одной записи на эпоху
        best_epoch: Эпоха с минимальной валидационной потерей
        best_val_loss: Эта потеря
        stop_reason: early_stopping, max_epochs или max_steps
        steps: Число шагов оптимизатора
    """
    records: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stop_reason: str = ""
    steps: int = 0

    @property
    def lrs(self) -> List[float]:
        return [r.lr for r in self.records]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.__dict__ for r in self.records], columns=HISTORY_COLUMNS)


def write_history_csv(history: History, path: Union[str, Path]) -> Path:
    """CSV: epoch, train_loss, val_loss, lr, seconds"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    history.to_frame().to_csv(target, index=False, float_format="%.8g")
    return target


@dataclass
class FitResult:
    model: SequenceClassifier
    history: History
    class_weights: np.ndarray


class Trainer:
    """
    Обучение одной модели.

    Эпоха: перемешивание с зерном seed ^ epoch -> пакеты (последний неполный
    сохраняется) -> взвешенная CE -> backward -> ограничение нормы -> AdamW.
    В конце эпохи считается валидационная потеря с весами обучающей выборки;
    планировщик и ранняя остановка следят за ней независимо. По окончании
    восстанавливаются параметры лучшей эпохи.

    Args:
        config: Параметры обучения
        record_timing: Писать длительность эпох (иначе 0 и история воспроизводима побайтно)
    """

    def __init__(self, config: Optional[TrainConfig] = None, record_timing: bool = False):
        self.config = config or TrainConfig()
        self.record_timing = record_timing

    def fit(self, model: SequenceClassifier, train: TrainingData, val: TrainingData,
            class_weights: Optional[np.ndarray] = None) -> FitResult:
        """
        Raises:
            SplitError: В обучающей выборке нет одного из классов
            TrainingDivergedError: Потеря или норма градиента не конечны
        """
        cfg = self.config
        num_classes = model.config.num_classes
        weights = (compute_class_weights(train.labels, num_classes) if class_weights is None
                   else np.asarray(class_weights, dtype=np.float64))
        params = model.parameters()
        optimizer = AdamW(params, lr=cfg.lr, betas=cfg.betas, eps=cfg.eps,
                          weight_decay=cfg.weight_decay)
        scheduler = ReduceLROnPlateau(optimizer, cfg.plateau_factor, cfg.plateau_patience,
                                      cfg.min_lr, cfg.improvement_threshold)
        stopper = EarlyStopping(cfg.early_stop_patience, cfg.improvement_threshold)
        history = History()
        best_state: Dict[str, np.ndarray] = model.state_dict()
        if len(val) == 0:
            logger.warning("Empty validation set, monitoring the training loss instead")

        logger.info("Training %s (%d parameters) on %d days, validating on %d; weights %s",
                    model.name, model.n_parameters(), len(train), len(val),
                    np.round(weights, 4).tolist())
        for epoch in range(1, cfg.max_epochs + 1):
            started = time.perf_counter()
            lr = optimizer.lr
            train_loss = self._train_epoch(model, optimizer, train, weights, epoch, history)
            val_loss = (self.evaluate_loss(model, val, weights) if len(val)
                        else train_loss)
            seconds = time.perf_counter() - started if self.record_timing else 0.0
            history.records.append(EpochRecord(epoch, train_loss, val_loss, lr, seconds))
            logger.info("Epoch %d: train_loss=%.4f val_loss=%.4f lr=%.2e",
                        epoch, train_loss, val_loss, lr)

            if stopper.step(val_loss, epoch):
                best_state = model.state_dict()
                history.best_epoch = epoch
                history.best_val_loss = val_loss
            scheduler.step(val_loss)
            if cfg.max_steps is not None and history.steps >= cfg.max_steps:
                history.stop_reason = "max_steps"
                break
            if stopper.should_stop:
                history.stop_reason = "early_stopping"
                break
        else:
            history.stop_reason = "max_epochs"

        if history.best_epoch:
            model.load_state_dict(best_state)
        model.eval()
        logger.info("Stopped after %d epoch(s) (%s); best epoch %d, val_loss=%.4f",
                    len(history.records), history.stop_reason, history.best_epoch,
                    history.best_val_loss)
        return FitResult(model=model, history=history, class_weights=weights)

    def _train_epoch(self, model: SequenceClassifier, optimizer: AdamW, data: TrainingData,
                     weights: np.ndarray, epoch: int, history: History) -> float:
        cfg = self.config
        model.train()
        order = np.random.default_rng(cfg.seed ^ epoch).permutation(len(data))
        loss_sum = 0.0
        weight_sum = 0.0
        for batch_index, start in enumerate(range(0, len(data), cfg.batch_size)):
            if cfg.max_steps is not None and history.steps >= cfg.max_steps:
                break
            batch = data.batch(order[start:start + cfg.batch_size])
            optimizer.zero_grad()
            loss = model.loss(batch.x, batch.mask, batch.labels, weights)
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingDivergedError("Non-finite training loss", lr=optimizer.lr,
                                            batch_index=batch_index,
                                            grad_norm=global_grad_norm(optimizer.params))
            loss.backward()
            norm = clip_grad_norm(optimizer.params, cfg.clip_norm)
            if not math.isfinite(norm):
                raise TrainingDivergedError("Non-finite gradient norm", lr=optimizer.lr,
                                            batch_index=batch_index, grad_norm=norm)
            optimizer.step()
            history.steps += 1
            batch_weight = float(weights[batch.labels].sum())
            loss_sum += value * batch_weight
            weight_sum += batch_weight
        return loss_sum / weight_sum if weight_sum else float("nan")

    def evaluate_loss(self, model: SequenceClassifier, data: TrainingData,
                      weights: Optional[np.ndarray] = None) -> float:
        model.eval()
        logits = model.logits(data.x, data.mask, batch_size=max(self.config.batch_size, 256))
        return weighted_cross_entropy_np(logits, data.labels, weights)


def fit(model: SequenceClassifier, train: TrainingData, val: TrainingData,
        config: Optional[TrainConfig] = None, record_timing: bool = False) -> FitResult:
    return Trainer(config, record_timing).fit(model, train, val)
