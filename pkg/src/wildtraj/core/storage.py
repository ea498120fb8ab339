"""Файловые форматы промежуточных результатов: суточные последовательности и контейнер TRJF"""

import struct
from datetime import date
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from ..utils.logging import setup_logger
from .errors import SchemaError
from .features import SCHEMA_COLUMNS, FeatureSet, movement_validity_from_mask
from .types import INTERPOLATED, OBSERVED, SLOTS_PER_DAY, UNDEFINED, DailySequence

logger = setup_logger(__name__)

FEATURE_MAGIC = b"TRJF"
FEATURE_VERSION = 1
_ORIGIN_TO_CODE = {OBSERVED: "O", INTERPOLATED: "I"}
_CODE_TO_ORIGIN = {"O": OBSERVED, "I": INTERPOLATED}

PathLike = Union[str, Path]


def write_days_csv(days: Iterable[DailySequence], path: PathLike) -> Path:
    """
    Сохраняет сутки в длинном формате: одна строка на определённый слот

    Колонки: animal_id, study_id, species, date, resolution, slot, lat, lon, origin{O|I}
    """
    rows = []
    for day in days:
        for slot in np.flatnonzero(day.obs_mask):
            rows.append((day.animal_id, day.study_id, day.species, day.day.isoformat(),
                         day.resolution, int(slot), repr(float(day.lat[slot])),
                         repr(float(day.lon[slot])), _ORIGIN_TO_CODE[int(day.origin[slot])]))
    frame = pd.DataFrame(rows, columns=["animal_id", "study_id", "species", "date",
                                        "resolution", "slot", "lat", "lon", "origin"])
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    return target


def read_days_csv(path: PathLike) -> List[DailySequence]:
    """Читает days.csv; movement_valid восстанавливается по маске"""
    frame = pd.read_csv(path, dtype={"animal_id": str, "study_id": str, "species": str,
                                     "date": str, "origin": str})
    required = {"animal_id", "study_id", "species", "date", "resolution", "slot", "lat", "lon",
                "origin"}
    if not required.issubset(frame.columns):
        raise SchemaError(f"{path}: missing columns {sorted(required - set(frame.columns))}")
    days: List[DailySequence] = []
    for (animal_id, day_iso), group in frame.groupby(["animal_id", "date"], sort=True):
        first = group.iloc[0]
        resolution = int(first["resolution"])
        n_slots = SLOTS_PER_DAY[resolution]
        lat = np.full(n_slots, np.nan)
        lon = np.full(n_slots, np.nan)
        origin = np.full(n_slots, UNDEFINED, dtype=np.uint8)
        slots = group["slot"].to_numpy(dtype=int)
        lat[slots] = group["lat"].to_numpy(dtype=float)
        lon[slots] = group["lon"].to_numpy(dtype=float)
        origin[slots] = [_CODE_TO_ORIGIN[c] for c in group["origin"]]
        obs_mask = (origin != UNDEFINED).astype(np.uint8)
        days.append(DailySequence(
            animal_id=str(animal_id),
            study_id=str(first["study_id"]),
            species=str(first["species"]),
            day=date.fromisoformat(str(day_iso)),
            resolution=resolution,
            lat=lat,
            lon=lon,
            obs_mask=obs_mask,
            movement_valid=movement_validity_from_mask(obs_mask),
            origin=origin,
        ))
    return days


def _write_str(handle: BinaryIO, text: str) -> None:
    data = text.encode("utf-8")
    handle.write(struct.pack("<I", len(data)))
    handle.write(data)


def _read_str(handle: BinaryIO) -> str:
    (length,) = struct.unpack("<I", _read_exact(handle, 4))
    return _read_exact(handle, length).decode("utf-8")


def _read_exact(handle: BinaryIO, n: int) -> bytes:
    data = handle.read(n)
    if len(data) != n:
        raise SchemaError("Truncated feature container")
    return data


def write_feature_set(features: FeatureSet, path: PathLike) -> Path:
    """
    Пишет контейнер TRJF.

    Заголовок: magic, version u32, T u32, F u32, count u32, schema, resolution u32;
    затем записи: species, animal_id, study_id, date (строки с длиной u32),
    x как T*F float32 little-endian по строкам, маски obs/movement по байту.
    """
    count, n_slots, n_cols = features.x.shape
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("wb") as handle:
        handle.write(FEATURE_MAGIC)
        handle.write(struct.pack("<IIII", FEATURE_VERSION, n_slots, n_cols, count))
        _write_str(handle, features.schema)
        handle.write(struct.pack("<I", features.resolution))
        for i in range(count):
            for text in (features.species[i], features.animal_ids[i], features.study_ids[i],
                         features.days[i]):
                _write_str(handle, str(text))
            handle.write(np.ascontiguousarray(features.x[i], dtype="<f4").tobytes())
            handle.write(np.ascontiguousarray(features.obs_mask[i], dtype=np.uint8).tobytes())
            handle.write(np.ascontiguousarray(features.movement_valid[i],
                                              dtype=np.uint8).tobytes())
    logger.debug("Wrote %d feature tensors to %s", count, target)
    return target


def read_feature_set(path: PathLike) -> FeatureSet:
    """Читает контейнер TRJF"""
    with Path(path).open("rb") as handle:
        if handle.read(4) != FEATURE_MAGIC:
            raise SchemaError(f"{path}: not a TRJF feature container")
        version, n_slots, n_cols, count = struct.unpack("<IIII", _read_exact(handle, 16))
        if version != FEATURE_VERSION:
            raise SchemaError(f"{path}: unsupported TRJF version {version}")
        schema = _read_str(handle)
        if schema not in SCHEMA_COLUMNS or len(SCHEMA_COLUMNS[schema]) != n_cols:
            raise SchemaError(f"{path}: schema {schema!r} does not match F={n_cols}")
        (resolution,) = struct.unpack("<I", _read_exact(handle, 4))
        meta: Dict[str, List[str]] = {"species": [], "animal": [], "study": [], "day": []}
        xs, obs, valid = [], [], []
        for _ in range(count):
            for key in ("species", "animal", "study", "day"):
                meta[key].append(_read_str(handle))
            xs.append(np.frombuffer(_read_exact(handle, 4 * n_slots * n_cols), dtype="<f4")
                      .reshape(n_slots, n_cols))
            obs.append(np.frombuffer(_read_exact(handle, n_slots), dtype=np.uint8))
            valid.append(np.frombuffer(_read_exact(handle, n_slots), dtype=np.uint8))
    return FeatureSet(
        x=np.stack(xs).astype(np.float32) if xs else np.zeros((0, n_slots, n_cols), np.float32),
        obs_mask=np.stack(obs) if obs else np.zeros((0, n_slots), np.uint8),
        movement_valid=np.stack(valid) if valid else np.zeros((0, n_slots), np.uint8),
        species=np.array(meta["species"], dtype=object),
        animal_ids=np.array(meta["animal"], dtype=object),
        study_ids=np.array(meta["study"], dtype=object),
        days=np.array(meta["day"], dtype=object),
        schema=schema,
        resolution=resolution,
    )


def write_text(path: PathLike, lines: Sequence[str]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target
