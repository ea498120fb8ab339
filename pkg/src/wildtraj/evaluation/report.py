"""Оценка контрольной точки на тестовых сутках и текстовые отчёты"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..core.errors import SchemaError, SplitError
from ..core.features import FeatureSet
from ..models.base_model import SequenceClassifier
from ..models.checkpoint import Checkpoint
from ..utils.config import read_kv_file
from ..utils.logging import setup_logger
from ..utils.pipeline import print_table
from .metrics import balanced_accuracy_detail, confusion_matrix, f1_positive, roc_auc

logger = setup_logger(__name__)

REPORT_FILE = "report.txt"
CONFUSION_FILE = "confusion.csv"
PER_STUDY_FILE = "per_study.csv"
COMPARE_COLUMNS = ["target", "arch", "features", "resolution", "balanced_acc", "f1", "auc"]

PathLike = Union[str, Path]


def _fmt(value: Optional[float]) -> str:
    if value is None or not np.isfinite(value):
        return "NA"
    return f"{value:.4f}"


@dataclass
class StudyMetrics:
    study_id: str
    n_days: int
    balanced_acc: float
    f1: float
    auc: Optional[float]
    cm: np.ndarray


@dataclass
class MetricsReport:
    """
    Итог оценки одной задачи один-против-всех.

    Attributes:
        balanced_acc, f1, auc: Метрики по всем тестовым суткам (auc = None, если в тесте один класс)
        cm: Матрица ошибок K x K
        per_study: Те же метрики по study_id
        flags: Диагностика: auc_undefined, zero_support_class_<k>
    """
    balanced_acc: float
    f1: float
    auc: Optional[float]
    cm: np.ndarray
    per_study: List[StudyMetrics] = field(default_factory=list)
    n_days: int = 0
    target: str = ""
    arch: str = ""
    features: str = ""
    resolution: int = 0
    seed: int = 0
    fingerprint: str = ""
    flags: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        """key = value, четыре знака после запятой, без отметок времени"""
        lines = [
            f"target = {self.target}",
            f"arch = {self.arch}",
            f"features = {self.features}",
            f"resolution = {self.resolution}",
            f"seed = {self.seed}",
            f"config_fingerprint = {self.fingerprint}",
            f"n_days = {self.n_days}",
            f"balanced_acc = {_fmt(self.balanced_acc)}",
            f"f1 = {_fmt(self.f1)}",
            f"auc = {_fmt(self.auc)}",
            "cm = " + ";".join(",".join(str(int(v)) for v in row) for row in self.cm),
            f"flags = {','.join(self.flags)}",
        ]
        for study in self.per_study:
            prefix = f"per_study.{study.study_id}"
            lines.append(f"{prefix}.n_days = {study.n_days}")
            lines.append(f"{prefix}.balanced_acc = {_fmt(study.balanced_acc)}")
            lines.append(f"{prefix}.f1 = {_fmt(study.f1)}")
            lines.append(f"{prefix}.auc = {_fmt(study.auc)}")
        return "\n".join(lines) + "\n"


def score_days(probabilities: np.ndarray, labels: np.ndarray,
               study_ids: Sequence[str]) -> MetricsReport:
    """
    Метрики по вероятностям классов.

    Класс - argmax, для AUC берётся вероятность положительного класса (1).
    """
    labels = np.asarray(labels, dtype=np.int64)
    num_classes = probabilities.shape[1]
    predictions = probabilities.argmax(axis=1)
    positive = probabilities[:, 1]
    cm = confusion_matrix(labels, predictions, num_classes)
    balanced = balanced_accuracy_detail(cm)
    auc = roc_auc(positive, labels)
    flags = [f"zero_support_class_{k}" for k in balanced.excluded_classes]
    if auc is None:
        flags.append("auc_undefined")

    studies = np.asarray(study_ids, dtype=object)
    per_study = []
    for study in sorted(set(studies.tolist())):
        rows = studies == study
        study_cm = confusion_matrix(labels[rows], predictions[rows], num_classes)
        per_study.append(StudyMetrics(
            study_id=study,
            n_days=int(rows.sum()),
            balanced_acc=balanced_accuracy_detail(study_cm).value,
            f1=f1_positive(study_cm),
            auc=roc_auc(positive[rows], labels[rows]),
            cm=study_cm,
        ))
    return MetricsReport(balanced_acc=balanced.value, f1=f1_positive(cm), auc=auc, cm=cm,
                         per_study=per_study, n_days=int(labels.size), flags=flags)


def evaluate(model: SequenceClassifier, features: FeatureSet, labels: np.ndarray,
             target: str = "", seed: int = 0, fingerprint: str = "",
             batch_size: int = 256) -> MetricsReport:
    """
    Прогоняет модель по подготовленным (стандартизованным) суткам

    Args:
        model: Обученный классификатор
        features: Тестовые сутки
        labels: Истинные метки
        target: Целевой вид задачи один-против-всех

    Returns:
        MetricsReport: Отчёт с разбивкой по исследованиям

    Raises:
        SplitError: Тестовая выборка пуста
    """
    if len(features) == 0:
        raise SplitError(f"Empty test set for target {target!r}, nothing to evaluate")
    model.eval()
    probabilities = model.predict_proba(features.x, features.obs_mask.astype(np.float32),
                                        batch_size=batch_size)
    report = score_days(probabilities, labels, features.study_ids)
    report.target = target
    report.arch = model.name
    report.features = features.schema
    report.resolution = features.resolution
    report.seed = seed
    report.fingerprint = fingerprint
    logger.info("%s vs rest (%s): balanced_acc=%s f1=%s auc=%s on %d days", target, model.name,
                _fmt(report.balanced_acc), _fmt(report.f1), _fmt(report.auc), report.n_days)
    return report


def evaluate_checkpoint(checkpoint: Checkpoint, raw_features: FeatureSet,
                        labels: np.ndarray, target: str = "") -> MetricsReport:
    """Стандартизует сутки статистиками из контрольной точки и оценивает модель"""
    if checkpoint.norm_stats is not None and checkpoint.norm_stats.schema != raw_features.schema:
        raise SchemaError(f"Checkpoint was trained on {checkpoint.norm_stats.schema}, "
                          f"features use {raw_features.schema}")
    features = raw_features.standardized(checkpoint.norm_stats)
    return evaluate(checkpoint.model, features, labels, target=target or
                    checkpoint.meta.get("target", ""),
                    seed=int(checkpoint.meta.get("seed", 0)),
                    fingerprint=checkpoint.meta.get("fingerprint", ""))


def write_report(report: MetricsReport, directory: PathLike) -> Dict[str, Path]:
    """Пишет report.txt, confusion.csv и per_study.csv"""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": target / REPORT_FILE,
        "confusion": target / CONFUSION_FILE,
        "per_study": target / PER_STUDY_FILE,
    }
    paths["report"].write_text(report.to_text(), encoding="utf-8")

    k = report.cm.shape[0]
    cm_frame = pd.DataFrame(report.cm, columns=[f"pred_{j}" for j in range(k)])
    cm_frame.insert(0, "true", list(range(k)))
    cm_frame.to_csv(paths["confusion"], index=False)

    rows = [{
        "study_id": s.study_id,
        "n_days": s.n_days,
        "balanced_acc": _fmt(s.balanced_acc),
        "f1": _fmt(s.f1),
        "auc": _fmt(s.auc),
        "cm": ";".join(",".join(str(int(v)) for v in row) for row in s.cm),
    } for s in report.per_study]
    pd.DataFrame(rows, columns=["study_id", "n_days", "balanced_acc", "f1", "auc", "cm"]) \
        .to_csv(paths["per_study"], index=False)
    logger.debug("Wrote reports to %s", target)
    return paths


def read_report(path: PathLike) -> Dict[str, str]:
    """report.txt -> словарь; принимает файл или каталог эксперимента"""
    report_file = Path(path)
    if report_file.is_dir():
        report_file = report_file / REPORT_FILE
    return dict(read_kv_file(report_file))


def compare(paths: Sequence[PathLike]) -> pd.DataFrame:
    """Сводная таблица отчётов: вид x архитектура x признаки x разрешение"""
    rows = []
    for path in paths:
        values = read_report(path)
        rows.append({column: values.get(column, "") for column in COMPARE_COLUMNS})
    frame = pd.DataFrame(rows, columns=COMPARE_COLUMNS)
    return frame.sort_values(["target", "arch", "features", "resolution"], kind="stable") \
        .reset_index(drop=True)


def print_comparison(frame: pd.DataFrame, quiet: bool = False) -> None:
    print_table(frame.to_dict("records"), list(frame.columns), title="One-vs-rest results",
                quiet=quiet)
