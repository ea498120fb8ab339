"""Модуль с базовыми типами данных телеметрии"""

from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import List, Tuple

import numpy as np

# Значения origin в сеточных треках
UNDEFINED = 0
OBSERVED = 1
INTERPOLATED = 2

SLOTS_PER_DAY = {3600: 24, 1800: 48}
MIN_OBSERVATIONS = {3600: 12, 1800: 25}
SECONDS_PER_DAY = 86400


def check_resolution(resolution: int) -> int:
    """Проверяет шаг сетки (секунды)"""
    if resolution not in SLOTS_PER_DAY:
        raise ValueError(f"Unsupported resolution {resolution}s, expected 3600 or 1800")
    return resolution


def to_datetime(timestamp: int) -> datetime:
    return datetime.fromtimestamp(timestamp, tz=timezone.utc)


def iso_utc(timestamp: int) -> str:
    return to_datetime(timestamp).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class FixRecord:
    """
    Одна GPS-засечка.

    Attributes:
        animal_id: Идентификатор особи
        study_id: Идентификатор исследования
        species: Метка вида
        timestamp: UTC, секунды POSIX
        lat: Широта, градусы [-90, 90]
        lon: Долгота, градусы (-180, 180]
    """
    animal_id: str
    study_id: str
    species: str
    timestamp: int
    lat: float
    lon: float

    @property
    def time(self) -> datetime:
        return to_datetime(self.timestamp)


@dataclass
class AnimalTrack:
    """Упорядоченные по времени засечки одной особи"""
    animal_id: str
    study_id: str
    species: str
    fixes: List[FixRecord] = field(default_factory=list)

    def is_strictly_increasing(self) -> bool:
        return all(a.timestamp < b.timestamp for a, b in zip(self.fixes, self.fixes[1:]))

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.animal_id, self.study_id, self.species)


@dataclass
class GridTrack:
    """
    Трек на регулярной сетке tau_k = epoch + k * resolution.

    Неопределённые узлы хранят NaN в lat/lon и UNDEFINED в origin.
    Первый и последний узлы всегда определены.
    """
    animal_id: str
    study_id: str
    species: str
    resolution: int
    epoch: int
    lat: np.ndarray
    lon: np.ndarray
    origin: np.ndarray

    def __len__(self) -> int:
        return int(self.origin.shape[0])

    @property
    def times(self) -> np.ndarray:
        return self.epoch + self.resolution * np.arange(len(self), dtype=np.int64)

    @property
    def defined(self) -> np.ndarray:
        return self.origin != UNDEFINED

    def copy(self) -> "GridTrack":
        return GridTrack(
            animal_id=self.animal_id,
            study_id=self.study_id,
            species=self.species,
            resolution=self.resolution,
            epoch=self.epoch,
            lat=self.lat.copy(),
            lon=self.lon.copy(),
            origin=self.origin.copy(),
        )

    def equals(self, other: "GridTrack") -> bool:
        """Точное сравнение (NaN == NaN) - используется эталонными тестами"""
        return (
            self.resolution == other.resolution
            and self.epoch == other.epoch
            and np.array_equal(self.origin, other.origin)
            and np.array_equal(self.lat, other.lat, equal_nan=True)
            and np.array_equal(self.lon, other.lon, equal_nan=True)
        )


@dataclass
class DailySequence:
    """
    Один день одной особи на фиксированной сетке (T = 24 или 48 слотов).

    Attributes:
        day: Календарная дата UTC
        lat, lon: Позиции слотов, NaN для неопределённых
        obs_mask: 1 если слот определён
        movement_valid: 1 если определены слот t и слот t-1
        origin: OBSERVED / INTERPOLATED / UNDEFINED по слотам
    """
    animal_id: str
    study_id: str
    species: str
    day: date
    resolution: int
    lat: np.ndarray
    lon: np.ndarray
    obs_mask: np.ndarray
    movement_valid: np.ndarray
    origin: np.ndarray

    @property
    def n_slots(self) -> int:
        return int(self.obs_mask.shape[0])

    @property
    def n_observed(self) -> int:
        return int(self.obs_mask.sum())

    @property
    def key(self) -> Tuple[str, str]:
        return (self.animal_id, self.day.isoformat())
