"""Перенос нерегулярных засечек на регулярную сетку и нарезка на сутки UTC"""

from dataclasses import dataclass, fields
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.logging import setup_logger
from .features import movement_validity_from_mask
from .types import (
    INTERPOLATED,
    MIN_OBSERVATIONS,
    OBSERVED,
    SECONDS_PER_DAY,
    SLOTS_PER_DAY,
    UNDEFINED,
    AnimalTrack,
    DailySequence,
    FixRecord,
    GridTrack,
    check_resolution,
    iso_utc,
)

logger = setup_logger(__name__)

_ORIGIN_CODES = {OBSERVED: "O", INTERPOLATED: "I"}
_EPOCH_DATE = date(1970, 1, 1)


@dataclass
class ResampleStats:
    """Счётчики пересэмплирования (складываются по особям)"""
    tracks: int = 0
    fixes_in: int = 0
    fixes_retained: int = 0
    interpolated: int = 0
    antimeridian_skipped: int = 0
    days_total: int = 0
    days_retained: int = 0
    days_dropped: int = 0

    def merge(self, other: "ResampleStats") -> "ResampleStats":
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))
        return self


def round_to_grid(t: int, resolution: int) -> int:
    """
    Ближайший узел сетки; ровно посередине округляем вверх (к более позднему времени)

    Args:
        t: Время, секунды POSIX
        resolution: Шаг сетки, 3600 или 1800 секунд

    Returns:
        int: Время узла сетки
    """
    check_resolution(resolution)
    return (t + resolution // 2) // resolution * resolution


def snap_and_select(track: AnimalTrack, resolution: int) -> Dict[int, FixRecord]:
    """
    Привязывает засечки к узлам сетки; в каждом узле остаётся ближайшая засечка.

    При равном расстоянии остаётся более ранняя засечка.

    Args:
        track: Трек после dedup_same_timestamp
        resolution: Шаг сетки

    Returns:
        Dict[int, FixRecord]: Время узла -> засечка
    """
    selected: Dict[int, FixRecord] = {}
    best: Dict[int, int] = {}
    for fix in track.fixes:
        slot = round_to_grid(fix.timestamp, resolution)
        distance = abs(fix.timestamp - slot)
        if slot not in best or distance < best[slot]:
            best[slot] = distance
            selected[slot] = fix
    return selected


def build_grid(track: AnimalTrack, selected: Dict[int, FixRecord],
               resolution: int) -> Optional[GridTrack]:
    """Сетка от первого до последнего выбранного узла; пустой выбор -> None"""
    if not selected:
        return None
    first, last = min(selected), max(selected)
    n = (last - first) // resolution + 1
    lat = np.full(n, np.nan)
    lon = np.full(n, np.nan)
    origin = np.full(n, UNDEFINED, dtype=np.uint8)
    for slot, fix in selected.items():
        k = (slot - first) // resolution
        lat[k] = fix.lat
        lon[k] = fix.lon
        origin[k] = OBSERVED
    return GridTrack(track.animal_id, track.study_id, track.species, resolution, first,
                     lat, lon, origin)


def fill_single_gaps(grid: GridTrack, stats: Optional[ResampleStats] = None) -> GridTrack:
    """
    Линейная интерполяция только одиночных пропусков.

    Узел заполняется, если оба соседа (tau - dt, tau + dt) наблюдены; значение -
    середина отрезка между соседями. Более длинные пропуски остаются
    неопределёнными, переноса значений вперёд/назад нет. Пары соседей через
    антимеридиан не интерполируются.
    """
    result = grid.copy()
    if len(grid) < 3:
        return result
    origin = grid.origin
    candidates = np.flatnonzero(
        (origin[1:-1] == UNDEFINED) & (origin[:-2] == OBSERVED) & (origin[2:] == OBSERVED)
    ) + 1
    skipped = 0
    for k in candidates:
        lon_a, lon_b = grid.lon[k - 1], grid.lon[k + 1]
        if abs(lon_b - lon_a) > 180.0:
            skipped += 1
            logger.warning("%s: gap at %s crosses the antimeridian, left undefined",
                           grid.animal_id, iso_utc(int(grid.epoch + k * grid.resolution)))
            continue
        result.lat[k] = grid.lat[k - 1] + 0.5 * (grid.lat[k + 1] - grid.lat[k - 1])
        result.lon[k] = lon_a + 0.5 * (lon_b - lon_a)
        result.origin[k] = INTERPOLATED
    if stats is not None:
        stats.interpolated += len(candidates) - skipped
        stats.antimeridian_skipped += skipped
    return result


def segment_days(grid: GridTrack,
                 stats: Optional[ResampleStats] = None) -> List[DailySequence]:
    """
    Нарезает сетку на календарные сутки UTC и отбрасывает дни с малым покрытием.

    Слот t соответствует часу (1 ч) или 2*час + минута/30 (30 мин). Порог
    покрытия: 12 определённых слотов для 1 ч, 25 для 30 мин; интерполированные
    слоты засчитываются.

    Args:
        grid: Сетка после fill_single_gaps
        stats: Счётчики (опционально)

    Returns:
        List[DailySequence]: Сохранённые дни по возрастанию даты
    """
    resolution = check_resolution(grid.resolution)
    n_slots = SLOTS_PER_DAY[resolution]
    threshold = MIN_OBSERVATIONS[resolution]
    times = grid.times
    first_day = int(times[0] // SECONDS_PER_DAY)
    last_day = int(times[-1] // SECONDS_PER_DAY)

    days: List[DailySequence] = []
    total = dropped = 0
    for day_index in range(first_day, last_day + 1):
        start = day_index * SECONDS_PER_DAY
        lo = max(0, (start - grid.epoch) // resolution)
        hi = min(len(grid), (start + SECONDS_PER_DAY - grid.epoch) // resolution)
        if hi <= lo:
            continue
        offset = (grid.epoch + lo * resolution - start) // resolution
        origin = np.full(n_slots, UNDEFINED, dtype=np.uint8)
        lat = np.full(n_slots, np.nan)
        lon = np.full(n_slots, np.nan)
        origin[offset:offset + hi - lo] = grid.origin[lo:hi]
        lat[offset:offset + hi - lo] = grid.lat[lo:hi]
        lon[offset:offset + hi - lo] = grid.lon[lo:hi]
        obs_mask = (origin != UNDEFINED).astype(np.uint8)
        if not obs_mask.any():
            continue
        total += 1
        if obs_mask.sum() < threshold:
            dropped += 1
            continue
        days.append(DailySequence(
            animal_id=grid.animal_id,
            study_id=grid.study_id,
            species=grid.species,
            day=_EPOCH_DATE + timedelta(days=day_index),
            resolution=resolution,
            lat=lat,
            lon=lon,
            obs_mask=obs_mask,
            movement_valid=movement_validity_from_mask(obs_mask),
            origin=origin,
        ))
    if stats is not None:
        stats.days_total += total
        stats.days_dropped += dropped
        stats.days_retained += total - dropped
    return days


def resample_track(track: AnimalTrack, resolution: int,
                   stats: Optional[ResampleStats] = None) -> Tuple[Optional[GridTrack],
                                                                   List[DailySequence]]:
    """Полный проход для одной особи: привязка -> сетка -> одиночные пропуски -> сутки"""
    local = ResampleStats(tracks=1, fixes_in=len(track.fixes))
    selected = snap_and_select(track, resolution)
    local.fixes_retained = len(selected)
    grid = build_grid(track, selected, resolution)
    days: List[DailySequence] = []
    if grid is not None:
        grid = fill_single_gaps(grid, local)
        days = segment_days(grid, local)
    if stats is not None:
        stats.merge(local)
    return grid, days


def resample_tracks(tracks: Iterable[AnimalTrack],
                    resolution: int) -> Tuple[List[DailySequence], ResampleStats]:
    """Пересэмплирует все треки; порядок дней - по особям, затем по дате"""
    stats = ResampleStats()
    days: List[DailySequence] = []
    for track in tracks:
        _, track_days = resample_track(track, resolution, stats)
        days.extend(track_days)
    logger.info(
        "Resampled %d tracks at %ds: %d days retained, %d dropped, %d slots interpolated",
        stats.tracks, resolution, stats.days_retained, stats.days_dropped, stats.interpolated,
    )
    return days, stats


def reference_grid(track: AnimalTrack, resolution: int) -> Optional[GridTrack]:
    """
    Эталонная сетка прямым перебором: для каждого узла просматриваются все засечки.

    Используется как независимый оракул для snap_and_select/fill_single_gaps.
    """
    if not track.fixes:
        return None
    half = resolution // 2
    stamps = [f.timestamp for f in track.fixes]
    lo = -(-(min(stamps) - half) // resolution) * resolution
    hi = (max(stamps) + half) // resolution * resolution
    slots = list(range(lo, hi + 1, resolution))
    chosen: List[Optional[FixRecord]] = []
    for slot in slots:
        best: Optional[FixRecord] = None
        for fix in track.fixes:
            d = fix.timestamp - slot
            # [slot - dt/2, slot + dt/2): ровно половина уходит в следующий узел
            if -half <= d < half:
                if best is None or abs(d) < abs(best.timestamp - slot) or (
                        abs(d) == abs(best.timestamp - slot) and fix.timestamp < best.timestamp):
                    best = fix
        chosen.append(best)
    while chosen and chosen[0] is None:
        chosen.pop(0)
        slots.pop(0)
    while chosen and chosen[-1] is None:
        chosen.pop()
        slots.pop()
    if not chosen:
        return None
    n = len(chosen)
    lat = np.array([f.lat if f else np.nan for f in chosen])
    lon = np.array([f.lon if f else np.nan for f in chosen])
    origin = np.array([OBSERVED if f else UNDEFINED for f in chosen], dtype=np.uint8)
    out_lat, out_lon, out_origin = lat.copy(), lon.copy(), origin.copy()
    for k in range(1, n - 1):
        if origin[k] == UNDEFINED and origin[k - 1] == OBSERVED and origin[k + 1] == OBSERVED:
            if abs(lon[k + 1] - lon[k - 1]) > 180.0:
                continue
            out_lat[k] = lat[k - 1] + 0.5 * (lat[k + 1] - lat[k - 1])
            out_lon[k] = lon[k - 1] + 0.5 * (lon[k + 1] - lon[k - 1])
            out_origin[k] = INTERPOLATED
    return GridTrack(track.animal_id, track.study_id, track.species, resolution, slots[0],
                     out_lat, out_lon, out_origin)


def write_grid_csv(grid: GridTrack, path: Union[str, Path]) -> Path:
    """Одна сетка в файл: grid_time_iso, lat, lon, origin{O|I}; неопределённые узлы пропускаются"""
    defined = grid.defined
    frame = pd.DataFrame({
        "grid_time_iso": [iso_utc(int(t)) for t in grid.times[defined]],
        "lat": [repr(float(v)) for v in grid.lat[defined]],
        "lon": [repr(float(v)) for v in grid.lon[defined]],
        "origin": [_ORIGIN_CODES[int(o)] for o in grid.origin[defined]],
    })
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    return target


def summarize_days(days: Iterable[DailySequence]) -> pd.DataFrame:
    """Сводка по видам: исследования, сохранённые дни, особи, определённые точки"""
    rows = [(d.species, d.study_id, d.animal_id, d.n_observed) for d in days]
    frame = pd.DataFrame(rows, columns=["species", "study_id", "animal_id", "points"])
    if frame.empty:
        return pd.DataFrame(columns=["species", "studies", "days", "animals", "points"])
    summary = frame.groupby("species").agg(
        studies=("study_id", "nunique"),
        days=("animal_id", "size"),
        animals=("animal_id", "nunique"),
        points=("points", "sum"),
    )
    return summary.reset_index()
