"""Разбиение на train/val/test без утечек: исследование целиком в тест, особь целиком в одну выборку"""

import zlib
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd

from ..utils.logging import setup_logger
from .errors import SchemaError, SplitError

logger = setup_logger(__name__)

SPLITS = ("train", "val", "test")
WITHIN_STUDY = "*"

DayKey = Tuple[str, str]


@dataclass(frozen=True)
class ManifestEntry:
    animal_id: str
    study_id: str
    species: str
    date: str
    split: str

    @property
    def key(self) -> DayKey:
        return (self.animal_id, self.date)


@dataclass
class SplitManifest:
    """
    Назначение каждого дня особи одной из выборок.

    Attributes:
        entries: Записи в порядке (animal_id, date)
        holdout: Вид -> исследование, отложенное под тест
        within_study: Виды, разбитые внутри одного исследования
        seed: Зерно перемешивания особей
        val_fraction: Доля дней в val среди оставшихся
    """
    entries: List[ManifestEntry]
    holdout: Dict[str, str] = field(default_factory=dict)
    within_study: Set[str] = field(default_factory=set)
    seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        self._index = {entry.key: entry for entry in self.entries}

    def split_of(self, key: DayKey) -> Optional[str]:
        entry = self._index.get(key)
        return entry.split if entry else None

    def keys(self, split: str) -> List[DayKey]:
        return [entry.key for entry in self.entries if entry.split == split]

    def counts(self) -> Dict[str, int]:
        counts = {name: 0 for name in SPLITS}
        for entry in self.entries:
            counts[entry.split] += 1
        return counts

    def indices(self, keys: Sequence[DayKey], split: str) -> np.ndarray:
        """Позиции ключей, попавших в выборку split (для FeatureSet.subset)"""
        return np.array([i for i, key in enumerate(keys) if self.split_of(key) == split],
                        dtype=np.int64)


def make_manifest(
    days: Sequence[Any],
    holdout_map: Dict[str, str],
    val_fraction: float = 0.2,
    seed: int = 0,
    allow_within_study_test: bool = False,
    test_fraction: float = 0.2,
) -> SplitManifest:
    """
    Строит манифест разбиения.

    Тест - все дни отложенного исследования вида. Остальные особи каждого вида
    перемешиваются детерминированно по seed и уходят в val, пока доля дней val
    не достигнет val_fraction; остальное - train. Назначение всегда по особи.

    Вид с одним исследованием (значение holdout '*' или отсутствие записи)
    разбивается внутри исследования только с allow_within_study_test.

    Args:
        days: Объекты с animal_id, study_id, species и key = (animal_id, date)
        holdout_map: Вид -> отложенное исследование
        val_fraction: Доля val по числу дней
        seed: Зерно перемешивания
        allow_within_study_test: Разрешить разбиение внутри исследования
        test_fraction: Доля теста для разбиения внутри исследования

    Returns:
        SplitManifest: Манифест

    Raises:
        SplitError: Вида или отложенного исследования из holdout_map нет в данных,
            или не остаётся данных для обучения
    """
    by_species: Dict[str, Dict[str, List[Any]]] = defaultdict(lambda: defaultdict(list))
    for day in days:
        by_species[day.species][day.animal_id].append(day)

    unknown = set(holdout_map) - set(by_species)
    if unknown:
        raise SplitError(f"Holdout declared for species absent from data: {sorted(unknown)} "
                         f"(species: {sorted(by_species)})")

    split_of_animal: Dict[str, str] = {}
    within: Set[str] = set()
    rng = np.random.default_rng(seed)
    for species in sorted(by_species):
        animals = by_species[species]
        studies = sorted({d.study_id for ds in animals.values() for d in ds})
        target = holdout_map.get(species)
        if target is None and len(studies) > 1:
            raise SplitError(f"No holdout study declared for species {species!r} "
                             f"(studies: {studies})")
        if target not in (None, WITHIN_STUDY) and target not in studies:
            raise SplitError(f"Holdout study {target!r} for {species!r} is absent from data "
                             f"(studies: {studies})")

        if target in (None, WITHIN_STUDY) or studies == [target]:
            if not allow_within_study_test:
                raise SplitError(
                    f"Species {species!r} has no training data outside study {studies[0]!r}; "
                    "pass --allow-within-study-test for a within-study split"
                )
            within.add(species)
            logger.warning("Species %s: within-study animal-level test split", species)
            test_animals = _draw_within_study_test(species, animals, test_fraction)
        else:
            test_animals = {a for a, ds in animals.items() if ds[0].study_id == target}

        for animal in test_animals:
            split_of_animal[animal] = "test"
        remaining = sorted(a for a in animals if a not in test_animals)
        if not remaining:
            raise SplitError(f"Species {species!r} has no training data")
        total = sum(len(animals[a]) for a in remaining)
        val_days = 0
        order = [remaining[i] for i in rng.permutation(len(remaining))]
        for position, animal in enumerate(order):
            # хотя бы одна особь вида остаётся в train
            if val_days < val_fraction * total and position < len(order) - 1:
                split_of_animal[animal] = "val"
                val_days += len(animals[animal])
            else:
                split_of_animal[animal] = "train"

    entries = sorted(
        (ManifestEntry(d.animal_id, d.study_id, d.species, d.key[1], split_of_animal[d.animal_id])
         for d in days),
        key=lambda e: (e.animal_id, e.date),
    )
    manifest = SplitManifest(entries, holdout=dict(holdout_map), within_study=within, seed=seed,
                             val_fraction=val_fraction)
    logger.info("Split manifest: %s", manifest.counts())
    return manifest


def _draw_within_study_test(species: str, animals: Dict[str, List[Any]],
                            test_fraction: float) -> Set[str]:
    # Зерно зависит только от вида: смена seed меняет лишь train/val
    rng = np.random.default_rng(zlib.crc32(species.encode("utf-8")))
    names = sorted(animals)
    if len(names) < 2:
        raise SplitError(f"Species {species!r} has a single animal, cannot split within study")
    total = sum(len(ds) for ds in animals.values())
    chosen: Set[str] = set()
    test_days = 0
    for i in rng.permutation(len(names)):
        if test_days >= test_fraction * total or len(chosen) == len(names) - 1:
            break
        chosen.add(names[i])
        test_days += len(animals[names[i]])
    return chosen


@dataclass
class AuditReport:
    """Итог проверки манифеста"""
    passed: bool
    violations: List[str] = field(default_factory=list)
    violating_keys: List[DayKey] = field(default_factory=list)
    violating_animals: List[str] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"status = {'pass' if self.passed else 'fail'}",
                 f"violations = {len(self.violations)}"]
        lines.extend(f"violation: {v}" for v in self.violations)
        return "\n".join(lines) + "\n"


def audit_leakage(manifest: SplitManifest, days: Sequence[Any]) -> AuditReport:
    """
    Проверяет манифест: отложенные исследования только в тесте и ни одна особь
    не встречается в двух выборках.
    """
    violations: List[str] = []
    keys: List[DayKey] = []
    animals_bad: Set[str] = set()

    splits_of_animal: Dict[str, Set[str]] = defaultdict(set)
    for entry in manifest.entries:
        splits_of_animal[entry.animal_id].add(entry.split)
    for animal, splits in sorted(splits_of_animal.items()):
        if len(splits) > 1:
            animals_bad.add(animal)
            violations.append(f"animal {animal} appears in {sorted(splits)}")

    for day in days:
        split = manifest.split_of(day.key)
        if split is None:
            keys.append(day.key)
            violations.append(f"day {day.key} is missing from the manifest")
            continue
        if day.species in manifest.within_study:
            continue
        holdout = manifest.holdout.get(day.species)
        if split == "test" and day.study_id != holdout:
            keys.append(day.key)
            violations.append(f"test day {day.key} from non-holdout study {day.study_id} "
                              f"({day.species})")
        elif split != "test" and day.study_id == holdout:
            keys.append(day.key)
            violations.append(f"{split} day {day.key} shares holdout study {day.study_id} "
                              f"({day.species})")

    report = AuditReport(passed=not violations, violations=violations, violating_keys=keys,
                         violating_animals=sorted(animals_bad))
    if report.passed:
        logger.info("Leakage audit passed (%d entries)", len(manifest.entries))
    else:
        logger.error("Leakage audit failed with %d violation(s)", len(violations))
    return report


def binary_labels(manifest: SplitManifest, target: str) -> Dict[DayKey, int]:
    """Один-против-всех: ключ дня -> 1 для целевого вида, иначе 0"""
    return {entry.key: int(entry.species == target) for entry in manifest.entries}


def write_manifest_csv(manifest: SplitManifest, path: Union[str, Path]) -> Path:
    frame = pd.DataFrame(
        [(e.animal_id, e.study_id, e.species, e.date, e.split) for e in manifest.entries],
        columns=["animal_id", "study_id", "species", "date", "split"],
    )
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False)
    return target


def read_manifest_csv(path: Union[str, Path], holdout: Optional[Dict[str, str]] = None,
                      within_study: Optional[Set[str]] = None) -> SplitManifest:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    required = ["animal_id", "study_id", "species", "date", "split"]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: manifest lacks columns {missing}")
    bad = set(frame["split"]) - set(SPLITS)
    if bad:
        raise SchemaError(f"{path}: unknown split labels {sorted(bad)}")
    entries = [ManifestEntry(*row) for row in frame[required].itertuples(index=False, name=None)]
    return SplitManifest(entries, holdout=holdout or {}, within_study=within_study or set())
