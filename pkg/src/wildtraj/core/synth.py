"""
Синтетические траектории видов-архетипов.

Коррелированное случайное блуждание в касательной плоскости с суточной
модуляцией длины шага, эпизодами покоя и пропуском засечек. Дают данные с
известной разметкой для проверки всего пайплайна без данных Movebank.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..utils.config import read_kv_file
from ..utils.logging import setup_logger
from .errors import SchemaError
from .ingest import ColumnMap
from .types import SECONDS_PER_DAY, FixRecord, check_resolution, iso_utc

logger = setup_logger(__name__)

BUNDLED_ARCHETYPES = Path(__file__).resolve().parent.parent / "configs" / "archetypes.conf"
DEFAULT_START = int(datetime(2021, 1, 1, tzinfo=timezone.utc).timestamp())
# Радиус Земли для касательной плоскости (метры)
_RADIUS_M = 6_371_000.0


class Archetype(BaseModel):
    """
    Параметры движения синтетического вида.

    Attributes:
        name: Имя архетипа
        step_mean_m: Средняя длина шага за час, метры (в единицах сферы step_mean_m / R)
        step_dispersion: Коэффициент вариации длины шага (0 - шаг постоянный)
        kappa: Концентрация угла поворота фон Мизеса (0 - равномерный поворот)
        circadian_amplitude: Амплитуда суточной модуляции a в [0, 1]
        circadian_phase: Фаза синуса в часах, [0, 24); пик активности в phase + 6
        rest_probability: Вероятность перейти в покой на шаге
        rest_mean_steps: Средняя длительность покоя в шагах
        dropout: Вероятность потерять засечку
    """
    model_config = ConfigDict(extra="forbid")

    name: str
    step_mean_m: float = Field(gt=0)
    step_dispersion: float = Field(0.5, ge=0, le=5)
    kappa: float = Field(1.0, ge=0)
    circadian_amplitude: float = Field(0.0, ge=0, le=1)
    circadian_phase: float = Field(0.0, ge=0, lt=24)
    rest_probability: float = Field(0.0, ge=0, lt=1)
    rest_mean_steps: float = Field(1.0, ge=1)
    dropout: float = Field(0.0, ge=0, lt=1)

    @field_validator("name")
    @classmethod
    def _check_name(cls, value: str) -> str:
        if not value or "." in value or "," in value:
            raise ValueError(f"invalid archetype name {value!r}")
        return value

    @property
    def step_mean_sphere(self) -> float:
        return self.step_mean_m / _RADIUS_M

    def circadian_factor(self, hour: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """1 + a * sin(2*pi*(h - phase)/24)"""
        return 1.0 + self.circadian_amplitude * np.sin(
            2.0 * np.pi * (np.asarray(hour) - self.circadian_phase) / 24.0)


@dataclass
class _AnimalTask:
    archetype: Archetype
    animal_id: str
    study_id: str
    species: str
    n_days: int
    resolution: int
    seed: int
    stream: int
    index: int
    center: Tuple[float, float]
    start: int
    jitter: int


def _validate(archetype: Archetype, center: Tuple[float, float], n_animals: int, n_days: int,
              resolution: int, jitter: int) -> None:
    check_resolution(resolution)
    lat, lon = center
    if not (-80.0 <= lat <= 80.0 and -180.0 < lon <= 180.0):
        raise SchemaError(f"Region center {center} is outside the supported range")
    if n_animals < 1 or n_days < 1:
        raise SchemaError("n_animals and n_days must be positive")
    if not 0 <= jitter < resolution // 2:
        raise SchemaError(f"jitter must lie in [0, {resolution // 2}), got {jitter}")


def _simulate_animal(task: _AnimalTask) -> List[FixRecord]:
    arch = task.archetype
    rng = np.random.default_rng([task.seed, task.stream, task.index])
    n_fixes = task.n_days * (SECONDS_PER_DAY // task.resolution)
    step_hours = task.resolution / 3600.0
    times = task.start + np.arange(n_fixes, dtype=np.int64) * task.resolution

    # Стартовая точка разбросана вокруг центра района (~ до 20 км)
    lat = np.empty(n_fixes)
    lon = np.empty(n_fixes)
    lat[0] = task.center[0] + rng.uniform(-0.2, 0.2)
    lon[0] = task.center[1] + rng.uniform(-0.2, 0.2)
    heading = rng.uniform(-np.pi, np.pi)
    resting = False
    for k in range(1, n_fixes):
        if resting:
            resting = rng.random() >= 1.0 / arch.rest_mean_steps
        else:
            resting = arch.rest_probability > 0 and rng.random() < arch.rest_probability
        if resting:
            lat[k], lon[k] = lat[k - 1], lon[k - 1]
            continue
        heading += rng.vonmises(0.0, arch.kappa) if arch.kappa > 0 else rng.uniform(-np.pi, np.pi)
        hour = ((times[k - 1] % SECONDS_PER_DAY) / 3600.0)
        mean = arch.step_mean_m * step_hours * float(arch.circadian_factor(hour))
        if arch.step_dispersion == 0 or mean == 0:
            length = mean
        else:
            shape = 1.0 / arch.step_dispersion ** 2
            length = rng.gamma(shape, mean / shape)
        north = length * math.cos(heading)
        east = length * math.sin(heading)
        lat[k] = lat[k - 1] + math.degrees(north / _RADIUS_M)
        lon[k] = lon[k - 1] + math.degrees(east / (_RADIUS_M * math.cos(math.radians(lat[k - 1]))))
    lon = (lon + 180.0) % 360.0 - 180.0
    lon[lon == -180.0] = 180.0

    if task.jitter:
        times = times + rng.integers(-task.jitter, task.jitter + 1, size=n_fixes)
    keep = rng.random(n_fixes) >= arch.dropout if arch.dropout > 0 else np.ones(n_fixes, bool)
    return [FixRecord(task.animal_id, task.study_id, task.species, int(t), float(a), float(o))
            for t, a, o in zip(times[keep], lat[keep], lon[keep])]


def generate(
    archetype: Archetype,
    n_animals: int,
    n_days: int,
    resolution: int = 3600,
    seed: int = 0,
    center: Tuple[float, float] = (0.0, 30.0),
    study_id: str = "synth",
    species: Optional[str] = None,
    start: int = DEFAULT_START,
    jitter: int = 0,
    stream: int = 0,
    workers: int = 1,
) -> List[FixRecord]:
    """
    Генерирует засечки для n_animals особей архетипа.

    Засечки идут с шагом resolution от полуночи UTC start; jitter сдвигает
    метку времени засечки на целое число секунд в [-jitter, jitter], не меняя
    узел сетки. Поток особи определяется (seed, stream, индекс особи).

    Args:
        archetype: Параметры движения
        n_animals: Число особей
        n_days: Число суток на особь
        resolution: Шаг засечек, секунды
        seed: Зерно
        center: Центр района (lat, lon)
        study_id: Исследование для всех особей
        species: Метка вида (по умолчанию имя архетипа)
        start: Время первой засечки, секунды POSIX (полночь UTC)
        jitter: Максимальный сдвиг метки времени, секунды
        stream: Номер потока (разводит исследования одного сценария)
        workers: Процессов для генерации

    Returns:
        List[FixRecord]: Засечки по особям, внутри особи по времени

    Raises:
        SchemaError: Параметры вне допустимого диапазона
    """
    _validate(archetype, center, n_animals, n_days, resolution, jitter)
    label = species or archetype.name
    tasks = [
        _AnimalTask(archetype, f"{study_id}-{label}-{i:03d}", study_id, label, n_days, resolution,
                    seed, stream, i, center, start, jitter)
        for i in range(n_animals)
    ]
    if workers > 1 and n_animals > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_simulate_animal, tasks))
    else:
        chunks = [_simulate_animal(task) for task in tasks]
    records = [fix for chunk in chunks for fix in chunk]
    logger.debug("Generated %d fixes for %d %s animals in %s", len(records), n_animals, label,
                 study_id)
    return records


@dataclass
class SynthScenario:
    """Сценарий: засечки всех видов и отложенное исследование каждого вида"""
    records: List[FixRecord]
    holdout: Dict[str, str]
    studies: Dict[str, List[str]]


def region_center(species_index: int, study_index: int) -> Tuple[float, float]:
    """Непересекающиеся районы: сетка с шагом 6 градусов"""
    return (-36.0 + 6.0 * study_index, -150.0 + 12.0 * species_index)


def synth_scenario(
    archetypes: Dict[str, Archetype],
    n_studies: int = 3,
    n_animals: int = 4,
    n_days: int = 10,
    resolution: int = 3600,
    seed: int = 0,
    jitter: int = 0,
    workers: int = 1,
) -> SynthScenario:
    """
    Многовидовой сценарий с n_studies исследованиями на вид.

    Каждое исследование получает свой район; последнее исследование вида
    объявляется отложенным для теста.

    Args:
        archetypes: Метка вида -> архетип
        n_studies: Исследований на вид
        n_animals: Особей в исследовании
        n_days: Суток на особь
        resolution: Шаг засечек
        seed: Зерно
        jitter: Сдвиг меток времени, секунды
        workers: Процессов для генерации
    """
    if n_studies < 1:
        raise SchemaError("n_studies must be positive")
    records: List[FixRecord] = []
    holdout: Dict[str, str] = {}
    studies: Dict[str, List[str]] = {}
    for s_index, label in enumerate(sorted(archetypes)):
        studies[label] = []
        for st_index in range(n_studies):
            study_id = f"S{s_index + 1}{st_index + 1:02d}"
            records.extend(generate(
                archetypes[label], n_animals, n_days, resolution=resolution, seed=seed,
                center=region_center(s_index, st_index), study_id=study_id, species=label,
                jitter=jitter, stream=s_index * 1000 + st_index, workers=workers,
            ))
            studies[label].append(study_id)
        holdout[label] = studies[label][-1]
    logger.info("Synthetic scenario: %d species, %d studies each, %d fixes",
                len(archetypes), n_studies, len(records))
    return SynthScenario(records, holdout, studies)


def load_archetypes(path: Optional[Union[str, Path]] = None) -> Dict[str, Archetype]:
    """
    Читает архетипы из файла key=value вида `grazer.step_mean_m = 150`.

    Без пути читается встроенный configs/archetypes.conf.

    Raises:
        SchemaError: Неизвестный параметр или значение вне диапазона
    """
    source = Path(path) if path else BUNDLED_ARCHETYPES
    raw: Dict[str, Dict[str, str]] = {}
    for key, value in read_kv_file(source):
        if "." not in key:
            raise SchemaError(f"{source}: expected 'archetype.param', got {key!r}")
        name, param = key.split(".", 1)
        raw.setdefault(name, {"name": name})[param] = value
    archetypes: Dict[str, Archetype] = {}
    for name, params in raw.items():
        try:
            archetypes[name] = Archetype.model_validate(params)
        except ValidationError as e:
            raise SchemaError(f"{source}: invalid archetype {name!r}: {e}") from e
    logger.debug("Loaded %d archetypes from %s", len(archetypes), source)
    return archetypes


def select_archetypes(available: Dict[str, Archetype],
                      species_map: Dict[str, str]) -> Dict[str, Archetype]:
    """Метка вида -> архетип по именам; пустое отображение берёт grazer и ranger"""
    mapping = species_map or {"grazer": "grazer", "ranger": "ranger"}
    missing = sorted(set(mapping.values()) - set(available))
    if missing:
        raise SchemaError(f"Unknown archetypes {missing}; available: {sorted(available)}")
    return {label: available[name] for label, name in mapping.items()}


def write_synth_csv(records: Sequence[FixRecord], path: Union[str, Path],
                    column_map: Optional[ColumnMap] = None) -> Path:
    """Пишет засечки в формате входного CSV (заголовки Movebank по умолчанию)"""
    columns = column_map or ColumnMap()
    frame = pd.DataFrame({
        columns.timestamp: [iso_utc(r.timestamp) for r in records],
        columns.lat: [repr(r.lat) for r in records],
        columns.lon: [repr(r.lon) for r in records],
        columns.animal_id: [r.animal_id for r in records],
        columns.study_id: [r.study_id for r in records],
        columns.species: [r.species for r in records],
    })
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    return target
