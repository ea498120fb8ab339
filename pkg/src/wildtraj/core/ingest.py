"""Чтение CSV телеметрии в проверенные потоки засечек"""

import io
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.logging import setup_logger
from ..utils.timezone import get_timezone
from .errors import CorruptInputError, SchemaError
from .types import AnimalTrack, FixRecord, iso_utc

logger = setup_logger(__name__)

MAX_REJECTED_SHARE = 0.5
_EXPLICIT_OFFSET = re.compile(r"(?:Z|[+-]\d{2}:?\d{2})$")
_EPOCH = pd.Timestamp("1970-01-01", tz="UTC")


@dataclass(frozen=True)
class ColumnMap:
    """Соответствие логических полей заголовкам CSV (по умолчанию - экспорт Movebank)"""
    timestamp: str = "timestamp"
    lat: str = "location-lat"
    lon: str = "location-long"
    animal_id: str = "individual-local-identifier"
    study_id: str = "study-id"
    species: str = "species"

    @classmethod
    def normalized(cls) -> "ColumnMap":
        """Схема fixes.csv, которую пишет write_fixes_csv"""
        return cls(timestamp="timestamp", lat="lat", lon="lon",
                   animal_id="animal_id", study_id="study_id", species="species")


@dataclass
class Rejection:
    """Отброшенная строка: номер строки файла (с учётом заголовка) и причина"""
    line: int
    reason: str
    raw: str = ""

    def to_text(self, source: str = "") -> str:
        prefix = f"{source}:" if source else "line "
        return f"{prefix}{self.line}: {self.reason}" + (f" | {self.raw}" if self.raw else "")


@dataclass
class IngestResult:
    """Результат разбора: засечки в порядке файла и отчёт об отброшенных строках"""
    records: List[FixRecord] = field(default_factory=list)
    rejections: List[Rejection] = field(default_factory=list)
    total_rows: int = 0
    source: str = ""

    @property
    def rejected(self) -> int:
        return len(self.rejections)

    def report_lines(self) -> List[str]:
        return [r.to_text(self.source) for r in self.rejections]


def parse_fixes(
    csv_stream: Union[TextIO, str, Path],
    column_map: Optional[ColumnMap] = None,
    study_id: Optional[str] = None,
    species: Optional[str] = None,
    species_map: Optional[Dict[str, str]] = None,
    tz_offset: Optional[str] = None,
    source: str = "",
) -> IngestResult:
    """
    Разбирает CSV с заголовком в список FixRecord.

    Строки с неразборчивой меткой времени или координатами вне диапазона
    отбрасываются и попадают в отчёт; порядок остальных сохраняется.

    Args:
        csv_stream: Текстовый поток, путь или содержимое файла
        column_map: Имена колонок (по умолчанию Movebank)
        study_id: Исследование, если в файле нет соответствующей колонки
        species: Вид, если в файле нет соответствующей колонки
        species_map: Вид по animal_id (перекрывает колонку и species)
        tz_offset: Смещение для меток без явного смещения (по умолчанию UTC)
        source: Имя источника для отчёта

    Returns:
        IngestResult: Засечки и отброшенные строки

    Raises:
        SchemaError: Нет обязательной колонки или файл пуст
        CorruptInputError: Отброшено больше половины строк
    """
    cmap = column_map or ColumnMap()
    species_map = species_map or {}
    frame = _read_frame(csv_stream, source)

    missing = [name for name in (cmap.timestamp, cmap.lat, cmap.lon, cmap.animal_id)
               if name not in frame.columns]
    if missing:
        raise SchemaError(f"{source or 'input'}: missing required column(s) {missing}")
    if cmap.study_id not in frame.columns and study_id is None:
        raise SchemaError(
            f"{source or 'input'}: no '{cmap.study_id}' column and no study id supplied"
        )
    has_species_column = cmap.species in frame.columns
    if not has_species_column and species is None:
        unknown = set(frame[cmap.animal_id].str.strip()) - set(species_map)
        if unknown:
            # Многовидовые исследования: угадывать вид не будем
            raise SchemaError(
                f"{source or 'input'}: no '{cmap.species}' column and no species assignment "
                f"for animals {sorted(unknown)[:5]}"
            )

    total = len(frame)
    timestamps = _parse_timestamps(frame[cmap.timestamp], tz_offset)
    lat = pd.to_numeric(frame[cmap.lat].str.strip(), errors="coerce").to_numpy(dtype=float)
    lon = pd.to_numeric(frame[cmap.lon].str.strip(), errors="coerce").to_numpy(dtype=float)
    lon = np.where(lon == -180.0, 180.0, lon)
    animals = frame[cmap.animal_id].str.strip().to_numpy()
    studies = (frame[cmap.study_id].str.strip().to_numpy() if cmap.study_id in frame.columns
               else np.full(total, study_id, dtype=object))
    labels = (frame[cmap.species].str.strip().to_numpy() if has_species_column
              else np.full(total, species, dtype=object))

    result = IngestResult(total_rows=total, source=source)
    raw_lines = frame.astype(str).agg(",".join, axis=1).to_numpy()
    for i in range(total):
        reason = _reject_reason(timestamps[i], lat[i], lon[i], animals[i], studies[i])
        label = species_map.get(animals[i], labels[i] if labels[i] else species)
        if reason is None and not label:
            reason = "missing species"
        if reason is not None:
            result.rejections.append(Rejection(line=i + 2, reason=reason, raw=raw_lines[i]))
            continue
        result.records.append(FixRecord(
            animal_id=str(animals[i]),
            study_id=str(studies[i]),
            species=str(label),
            timestamp=int(timestamps[i]),
            lat=float(lat[i]),
            lon=float(lon[i]),
        ))

    if result.rejected:
        logger.warning("%s: rejected %d of %d rows", source or "input", result.rejected, total)
    if result.rejected > MAX_REJECTED_SHARE * total:
        raise CorruptInputError(
            f"{source or 'input'}: corrupt input, {result.rejected} of {total} rows rejected",
            rejected=result.rejected, total=total,
        )
    return result


def _read_frame(csv_stream: Union[TextIO, str, Path], source: str) -> pd.DataFrame:
    if isinstance(csv_stream, Path) or (isinstance(csv_stream, str) and "\n" not in csv_stream
                                        and Path(csv_stream).exists()):
        csv_stream = io.StringIO(Path(csv_stream).read_text(encoding="utf-8"))
    elif isinstance(csv_stream, str):
        csv_stream = io.StringIO(csv_stream)
    try:
        frame = pd.read_csv(csv_stream, dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise SchemaError(f"{source or 'input'}: empty file") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    if frame.empty:
        raise SchemaError(f"{source or 'input'}: empty file (header only)")
    return frame


def _parse_timestamps(column: pd.Series, tz_offset: Optional[str]) -> np.ndarray:
    """Метки времени -> секунды POSIX (float, NaN для неразборчивых), доли секунды отбрасываются"""
    text = column.str.strip()
    explicit = text.str.contains(_EXPLICIT_OFFSET.pattern, regex=True)
    parsed = pd.Series(pd.NaT, index=text.index, dtype="datetime64[ns, UTC]")
    if explicit.any():
        parsed[explicit] = pd.to_datetime(text[explicit], errors="coerce", utc=True,
                                          format="ISO8601")
    naive = ~explicit
    if naive.any():
        local = pd.to_datetime(text[naive], errors="coerce", format="ISO8601")
        tz = get_timezone(tz_offset)
        parsed[naive] = local.dt.tz_localize(tz, ambiguous="NaT",
                                             nonexistent="NaT").dt.tz_convert("UTC")
    seconds = (parsed.dt.floor("s") - _EPOCH) // pd.Timedelta(seconds=1)
    return seconds.astype("float64").to_numpy()


def _reject_reason(ts: float, lat: float, lon: float, animal: str, study: str) -> Optional[str]:
    if not np.isfinite(ts):
        return "unparseable timestamp"
    if not np.isfinite(lat) or not -90.0 <= lat <= 90.0:
        return "latitude out of range"
    if not np.isfinite(lon) or not -180.0 < lon <= 180.0:
        return "longitude out of range"
    if not animal:
        return "missing animal id"
    if not study:
        return "missing study id"
    return None


def group_tracks(records: Iterable[FixRecord]) -> List[AnimalTrack]:
    """
    Группирует засечки по особям, сортирует по времени и усредняет дубликаты.

    Raises:
        SchemaError: Одна особь встречается с разными исследованиями или видами
    """
    tracks: Dict[str, AnimalTrack] = {}
    for record in records:
        track = tracks.get(record.animal_id)
        if track is None:
            track = tracks[record.animal_id] = AnimalTrack(
                record.animal_id, record.study_id, record.species)
        elif (track.study_id, track.species) != (record.study_id, record.species):
            raise SchemaError(
                f"animal {record.animal_id!r} appears with ({track.study_id}, {track.species}) "
                f"and ({record.study_id}, {record.species})"
            )
        track.fixes.append(record)
    result = []
    for animal_id in sorted(tracks):
        track = tracks[animal_id]
        track.fixes.sort(key=lambda f: f.timestamp)
        result.append(dedup_same_timestamp(track))
    return result


def dedup_same_timestamp(track: AnimalTrack) -> AnimalTrack:
    """
    Усредняет засечки с одинаковой меткой времени (арифметическое среднее lat/lon).

    Args:
        track: Трек, отсортированный по времени

    Returns:
        AnimalTrack: Трек со строго возрастающими метками времени
    """
    fixes: List[FixRecord] = []
    i = 0
    n = len(track.fixes)
    while i < n:
        j = i + 1
        while j < n and track.fixes[j].timestamp == track.fixes[i].timestamp:
            j += 1
        if j - i == 1:
            fixes.append(track.fixes[i])
        else:
            group = track.fixes[i:j]
            fixes.append(FixRecord(
                animal_id=track.animal_id,
                study_id=track.study_id,
                species=track.species,
                timestamp=group[0].timestamp,
                lat=float(np.mean([f.lat for f in group])),
                lon=float(np.mean([f.lon for f in group])),
            ))
        i = j
    return AnimalTrack(track.animal_id, track.study_id, track.species, fixes)


def load_sidecar(path: Union[str, Path]) -> Dict[str, Tuple[Optional[str], Optional[str]]]:
    """
    Читает сопроводительный манифест file,study_id,species

    Returns:
        Словарь имя файла -> (study_id, species); пустые значения -> None
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    if "file" not in frame.columns:
        raise SchemaError(f"{path}: sidecar manifest needs a 'file' column")
    mapping: Dict[str, Tuple[Optional[str], Optional[str]]] = {}
    for row in frame.itertuples(index=False):
        study = getattr(row, "study_id", "") or None
        label = getattr(row, "species", "") or None
        mapping[Path(row.file).name] = (study, label)
    return mapping


def ingest_files(
    paths: Iterable[Union[str, Path]],
    column_map: Optional[ColumnMap] = None,
    study_id: Optional[str] = None,
    species: Optional[str] = None,
    sidecar: Optional[Union[str, Path]] = None,
    tz_offset: Optional[str] = None,
) -> List[IngestResult]:
    """Разбирает несколько файлов; сопроводительный манифест задаёт study/species по файлу"""
    assignments = load_sidecar(sidecar) if sidecar else {}
    results = []
    for path in paths:
        path = Path(path)
        file_study, file_species = assignments.get(path.name, (None, None))
        result = parse_fixes(
            path,
            column_map=column_map,
            study_id=file_study or study_id,
            species=file_species or species,
            tz_offset=tz_offset,
            source=path.name,
        )
        logger.info("%s: %d fixes parsed, %d rejected", path.name, len(result.records),
                    result.rejected)
        results.append(result)
    return results


def write_fixes_csv(records: Iterable[FixRecord], path: Union[str, Path]) -> Path:
    """Пишет засечки в нормализованной схеме fixes.csv"""
    rows = [(r.animal_id, r.study_id, r.species, iso_utc(r.timestamp), repr(r.lat), repr(r.lon))
            for r in records]
    frame = pd.DataFrame(rows, columns=["animal_id", "study_id", "species", "timestamp",
                                        "lat", "lon"])
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    return target


def read_fixes_csv(path: Union[str, Path]) -> List[FixRecord]:
    """Читает fixes.csv, записанный write_fixes_csv"""
    return parse_fixes(Path(path), column_map=ColumnMap.normalized(), source=Path(path).name).records


def write_rejections(results: Iterable[IngestResult], path: Union[str, Path]) -> Path:
    """Отчёт об отброшенных строках: одна строка на запись"""
    lines: List[str] = []
    for result in results:
        lines.extend(result.report_lines())
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return target
