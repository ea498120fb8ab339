"""Кинематические признаки суточных последовательностей"""

from dataclasses import dataclass, field, replace
from datetime import date
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..utils.logging import setup_logger
from .errors import SchemaError
from .types import DailySequence

logger = setup_logger(__name__)

EARTH_RADIUS_M = 6_371_000.0
STD_FLOOR = 1e-8

SCHEMA_COLUMNS: Dict[str, List[str]] = {
    "minimal5": ["dx", "dy", "dz", "t_sin", "t_cos"],
    "augmented10": ["dx", "dy", "dz", "speed", "bearing_sin", "bearing_cos",
                    "turn_sin", "turn_cos", "t_sin", "t_cos"],
}
# Колонки движения (стандартизуются); временные колонки не трогаем
MOVEMENT_COLUMNS: Dict[str, int] = {"minimal5": 3, "augmented10": 8}

ArrayLike = Union[float, np.ndarray]


def check_schema(schema: str) -> str:
    if schema not in SCHEMA_COLUMNS:
        raise SchemaError(f"Unknown feature schema {schema!r}, expected one of {list(SCHEMA_COLUMNS)}")
    return schema


def to_unit_sphere(lat: ArrayLike, lon: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """
    Проекция широты/долготы (градусы) на единичную сферу

    Returns:
        (x, y, z): x = cos(phi)cos(lambda), y = cos(phi)sin(lambda), z = sin(phi)
    """
    phi = np.radians(lat)
    lam = np.radians(lon)
    cos_phi = np.cos(phi)
    return cos_phi * np.cos(lam), cos_phi * np.sin(lam), np.sin(phi)


def displacement(p_t: Tuple[float, float], p_prev: Tuple[float, float]) -> Tuple[float, float, float]:
    """Разность координат на единичной сфере между позициями (lat, lon)"""
    x1, y1, z1 = to_unit_sphere(*p_t)
    x0, y0, z0 = to_unit_sphere(*p_prev)
    return x1 - x0, y1 - y0, z1 - z0


def step_length(delta: Sequence[ArrayLike]) -> ArrayLike:
    """Длина хорды шага"""
    dx, dy, dz = delta
    return np.sqrt(np.square(dx) + np.square(dy) + np.square(dz))


def speed(length: ArrayLike, dt_hours: float) -> ArrayLike:
    """Скорость в единицах сферы в час"""
    if dt_hours <= 0:
        raise ValueError(f"time step must be positive, got {dt_hours}")
    return length / dt_hours


def speed_m_per_h(v: ArrayLike) -> ArrayLike:
    """Перевод скорости в метры в час - только для отчётов"""
    return v * EARTH_RADIUS_M


def bearing(delta: Sequence[ArrayLike]) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
    """
    Направление шага atan2(dy, dx) по x/y-компонентам сферы (это не компасный азимут).

    Для нулевого шага (dx = dy = 0) направление не определено: кодируется как
    (0, 0) и флаг defined = False.

    Returns:
        (sin, cos, defined)
    """
    dx = np.asarray(delta[0], dtype=float)
    dy = np.asarray(delta[1], dtype=float)
    defined = (dx != 0) | (dy != 0)
    theta = np.arctan2(dy, dx)
    sin = np.where(defined, np.sin(theta), 0.0)
    cos = np.where(defined, np.cos(theta), 0.0)
    if sin.ndim == 0:
        return float(sin), float(cos), bool(defined)
    return sin, cos, defined


def wrap_angle(angle: ArrayLike) -> ArrayLike:
    """
    Свёртка угла в полуоткрытый интервал [-pi, pi).

    pi переходит в -pi; для sin/cos это одна и та же точка.
    """
    return np.mod(np.asarray(angle) + np.pi, 2.0 * np.pi) - np.pi


def turning_angle(theta_t: ArrayLike, theta_prev: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Угол поворота между последовательными направлениями, (sin, cos)"""
    delta = wrap_angle(np.asarray(theta_t) - np.asarray(theta_prev))
    return np.sin(delta), np.cos(delta)


def time_encoding(slot: ArrayLike, resolution: int) -> Tuple[ArrayLike, ArrayLike]:
    """
    Циклическое кодирование времени суток

    1 ч: час h, угол 2*pi*h/24; 30 мин: минуты m = 30*slot, угол 2*pi*m/1440
    """
    if resolution == 3600:
        angle = 2.0 * np.pi * np.asarray(slot, dtype=float) / 24.0
    elif resolution == 1800:
        angle = 2.0 * np.pi * (30.0 * np.asarray(slot, dtype=float)) / 1440.0
    else:
        raise ValueError(f"Unsupported resolution {resolution}s")
    return np.sin(angle), np.cos(angle)


def movement_validity_from_mask(obs_mask: np.ndarray) -> np.ndarray:
    """movement_valid_t = m_t * m_{t-1}; слот 0 всегда 0"""
    obs = np.asarray(obs_mask).astype(bool)
    valid = np.zeros(obs.shape[0], dtype=np.uint8)
    valid[1:] = obs[1:] & obs[:-1]
    return valid


def movement_validity(day: DailySequence) -> np.ndarray:
    """Вектор movement_valid для суток на номинальной сетке"""
    return movement_validity_from_mask(day.obs_mask)


@dataclass
class RawFeatures:
    """Признаки до стандартизации: NaN там, где движение не определено"""
    x: np.ndarray
    bearing_defined: np.ndarray
    turning_defined: np.ndarray


def build_features(day: DailySequence, schema: str) -> RawFeatures:
    """
    Считает признаки по слотам без стандартизации.

    Строки с m_t = 0 целиком NaN; строки с m_t = 1, movement_valid_t = 0 - NaN
    в колонках движения и определённое время.
    """
    check_schema(schema)
    n_slots = day.n_slots
    n_cols = len(SCHEMA_COLUMNS[schema])
    x = np.full((n_slots, n_cols), np.nan)
    obs = day.obs_mask.astype(bool)
    valid = day.movement_valid.astype(bool)

    px, py, pz = to_unit_sphere(day.lat, day.lon)
    dx = np.full(n_slots, np.nan)
    dy = np.full(n_slots, np.nan)
    dz = np.full(n_slots, np.nan)
    dx[1:], dy[1:], dz[1:] = px[1:] - px[:-1], py[1:] - py[:-1], pz[1:] - pz[:-1]
    dx[~valid] = dy[~valid] = dz[~valid] = np.nan
    x[:, 0], x[:, 1], x[:, 2] = dx, dy, dz

    t_sin, t_cos = time_encoding(np.arange(n_slots), day.resolution)
    x[obs, -2] = t_sin[obs]
    x[obs, -1] = t_cos[obs]

    bearing_defined = np.zeros(n_slots, dtype=bool)
    turning_defined = np.zeros(n_slots, dtype=bool)
    if schema == "augmented10":
        dt_hours = day.resolution / 3600.0
        x[valid, 3] = speed(step_length((dx[valid], dy[valid], dz[valid])), dt_hours)
        b_sin, b_cos, b_def = bearing((np.where(valid, dx, 0.0), np.where(valid, dy, 0.0)))
        bearing_defined = b_def & valid
        x[valid, 4] = b_sin[valid]
        x[valid, 5] = b_cos[valid]
        theta = np.arctan2(np.where(valid, dy, 0.0), np.where(valid, dx, 0.0))
        turning_defined[1:] = bearing_defined[1:] & bearing_defined[:-1]
        tr_sin, tr_cos = np.zeros(n_slots), np.zeros(n_slots)
        idx = np.flatnonzero(turning_defined)
        tr_sin[idx], tr_cos[idx] = turning_angle(theta[idx], theta[idx - 1])
        x[valid, 6] = tr_sin[valid]
        x[valid, 7] = tr_cos[valid]
    return RawFeatures(x=x, bearing_defined=bearing_defined, turning_defined=turning_defined)


@dataclass
class NormStats:
    """Среднее и стандартное отклонение колонок движения по обучающей выборке"""
    schema: str
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        """(x - mu) / sigma для колонок движения; NaN остаются NaN"""
        out = x.copy()
        k = self.mean.shape[0]
        out[..., :k] = (x[..., :k] - self.mean) / self.std
        return out

    def to_text(self) -> str:
        lines = [f"norm.schema = {self.schema}"]
        lines.append("norm.mean = " + ",".join(repr(float(v)) for v in self.mean))
        lines.append("norm.std = " + ",".join(repr(float(v)) for v in self.std))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "NormStats":
        values: Dict[str, str] = {}
        for line in text.splitlines():
            if "=" in line:
                key, value = line.split("=", 1)
                values[key.strip()] = value.strip()
        try:
            return cls(
                schema=values["norm.schema"],
                mean=np.array([float(v) for v in values["norm.mean"].split(",")]),
                std=np.array([float(v) for v in values["norm.std"].split(",")]),
            )
        except KeyError as e:
            raise SchemaError(f"Norm stats text lacks {e}") from e


def fit_norm_stats(raws: Iterable[RawFeatures], schema: str) -> NormStats:
    """
    Оценивает среднее/СКО колонок движения по определённым значениям.

    СКО - популяционное, с нижней границей STD_FLOOR. Колонка без значений
    получает (0, 1).
    """
    k = MOVEMENT_COLUMNS[check_schema(schema)]
    blocks = [raw.x[:, :k] for raw in raws]
    values = np.concatenate(blocks, axis=0) if blocks else np.zeros((0, k))
    return _column_stats(values, schema)


def _column_stats(values: np.ndarray, schema: str) -> NormStats:
    k = values.shape[1]
    values = values.astype(np.float64)
    counts = np.sum(~np.isnan(values), axis=0)
    mean = np.zeros(k)
    std = np.ones(k)
    present = counts > 0
    if present.any():
        mean[present] = np.nanmean(values[:, present], axis=0)
        std[present] = np.nanstd(values[:, present], axis=0)
    std = np.maximum(std, STD_FLOOR)
    logger.debug("Fitted norm stats on %d rows: mean=%s std=%s", values.shape[0], mean, std)
    return NormStats(schema, mean, std)


@dataclass
class FeatureTensor:
    """
    Матрица T x F, готовая для модели.

    Attributes:
        x: Признаки; строки паддинга нулевые, неопределённое движение - 0
        obs_mask: m_t
        movement_valid: Флаг определённости движения
        bearing_defined, turning_defined: Диагностические флаги направлений
    """
    x: np.ndarray
    obs_mask: np.ndarray
    movement_valid: np.ndarray
    schema: str
    resolution: int
    species: str
    animal_id: str
    study_id: str
    day: date
    bearing_defined: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    turning_defined: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def key(self) -> Tuple[str, str]:
        return (self.animal_id, self.day.isoformat())


def assemble(day: DailySequence, schema: str, stats: Optional[NormStats] = None) -> FeatureTensor:
    """
    Собирает FeatureTensor: признаки -> (стандартизация) -> NaN в 0

    Raises:
        SchemaError: Статистики посчитаны для другой схемы
    """
    raw = build_features(day, schema)
    x = raw.x
    if stats is not None:
        if stats.schema != schema:
            raise SchemaError(f"Norm stats fitted for {stats.schema}, tensors use {schema}")
        x = stats.apply(x)
    x = np.nan_to_num(x, nan=0.0)
    return FeatureTensor(
        x=x,
        obs_mask=day.obs_mask.astype(np.uint8),
        movement_valid=day.movement_valid.astype(np.uint8),
        schema=schema,
        resolution=day.resolution,
        species=day.species,
        animal_id=day.animal_id,
        study_id=day.study_id,
        day=day.day,
        bearing_defined=raw.bearing_defined,
        turning_defined=raw.turning_defined,
    )


@dataclass
class FeatureSet:
    """Пакет тензоров: x (N, T, F), маски (N, T), ключи групп"""
    x: np.ndarray
    obs_mask: np.ndarray
    movement_valid: np.ndarray
    species: np.ndarray
    animal_ids: np.ndarray
    study_ids: np.ndarray
    days: np.ndarray
    schema: str
    resolution: int

    def __len__(self) -> int:
        return int(self.x.shape[0])

    @classmethod
    def from_tensors(cls, tensors: Sequence[FeatureTensor]) -> "FeatureSet":
        if not tensors:
            raise SchemaError("Cannot build a feature set from zero tensors")
        schema, resolution = tensors[0].schema, tensors[0].resolution
        if any(t.schema != schema or t.resolution != resolution for t in tensors):
            raise SchemaError("Mixed schemas or resolutions in one feature set")
        return cls(
            x=np.stack([t.x for t in tensors]),
            obs_mask=np.stack([t.obs_mask for t in tensors]).astype(np.uint8),
            movement_valid=np.stack([t.movement_valid for t in tensors]).astype(np.uint8),
            species=np.array([t.species for t in tensors], dtype=object),
            animal_ids=np.array([t.animal_id for t in tensors], dtype=object),
            study_ids=np.array([t.study_id for t in tensors], dtype=object),
            days=np.array([t.day.isoformat() for t in tensors], dtype=object),
            schema=schema,
            resolution=resolution,
        )

    def subset(self, indices: np.ndarray) -> "FeatureSet":
        return FeatureSet(
            x=self.x[indices],
            obs_mask=self.obs_mask[indices],
            movement_valid=self.movement_valid[indices],
            species=self.species[indices],
            animal_ids=self.animal_ids[indices],
            study_ids=self.study_ids[indices],
            days=self.days[indices],
            schema=self.schema,
            resolution=self.resolution,
        )

    @classmethod
    def from_days(cls, days: Sequence[DailySequence], schema: str) -> "FeatureSet":
        """Нестандартизованные признаки; неопределённые значения остаются NaN"""
        if not days:
            raise SchemaError("Cannot build a feature set from zero days")
        resolution = days[0].resolution
        if any(d.resolution != resolution for d in days):
            raise SchemaError("Mixed resolutions in one feature set")
        return cls(
            x=np.stack([build_features(d, schema).x for d in days]).astype(np.float32),
            obs_mask=np.stack([d.obs_mask for d in days]).astype(np.uint8),
            movement_valid=np.stack([d.movement_valid for d in days]).astype(np.uint8),
            species=np.array([d.species for d in days], dtype=object),
            animal_ids=np.array([d.animal_id for d in days], dtype=object),
            study_ids=np.array([d.study_id for d in days], dtype=object),
            days=np.array([d.day.isoformat() for d in days], dtype=object),
            schema=schema,
            resolution=resolution,
        )

    def fit_norm_stats(self, indices: Optional[np.ndarray] = None) -> NormStats:
        """Статистики колонок движения по строкам indices (обычно обучающая выборка)"""
        k = MOVEMENT_COLUMNS[self.schema]
        x = self.x if indices is None else self.x[indices]
        return _column_stats(x[..., :k].reshape(-1, k), self.schema)

    def standardized(self, stats: Optional[NormStats] = None) -> "FeatureSet":
        """
        Копия, готовая для модели: (x - mu) / sigma, затем NaN -> 0

        Raises:
            SchemaError: Статистики посчитаны для другой схемы
        """
        x = self.x.astype(np.float64)
        if stats is not None:
            if stats.schema != self.schema:
                raise SchemaError(f"Norm stats fitted for {stats.schema}, tensors use {self.schema}")
            x = stats.apply(x)
        return replace(self, x=np.nan_to_num(x, nan=0.0).astype(np.float32))

    def keys(self) -> List[Tuple[str, str]]:
        return list(zip(self.animal_ids.tolist(), self.days.tolist()))

    def binary_labels(self, target: str) -> np.ndarray:
        """Один-против-всех: целевой вид -> 1, остальные -> 0"""
        return (self.species == target).astype(np.int64)


def featurize(days: Sequence[DailySequence], schema: str,
              stats: Optional[NormStats] = None) -> List[FeatureTensor]:
    return [assemble(day, schema, stats) for day in days]
