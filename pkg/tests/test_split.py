from dataclasses import replace
from datetime import date

import numpy as np
import pytest

from wildtraj.core.errors import SplitError
from wildtraj.core.split import (
    SplitManifest,
    audit_leakage,
    binary_labels,
    make_manifest,
    read_manifest_csv,
    write_manifest_csv,
)

from conftest import make_day


def single_study_days(n_animals=5, n_days=3, species="zebra", study="Z1"):
    return [make_day(range(24), animal_id=f"{species}{a}", study_id=study, species=species,
                     day=date(2021, 1, d + 1), seed=a * 10 + d)
            for a in range(n_animals) for d in range(n_days)]


class TestManifest:
    def test_holdout_goes_to_test(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout, seed=1)
        for day in synth_days:
            split = manifest.split_of(day.key)
            assert (split == "test") == (day.study_id == synth_holdout[day.species])

    def test_animal_in_single_split(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout, seed=1)
        splits = {}
        for entry in manifest.entries:
            splits.setdefault(entry.animal_id, set()).add(entry.split)
        assert all(len(s) == 1 for s in splits.values())

    def test_every_species_keeps_training_data(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout, val_fraction=0.9, seed=4)
        for species in ("grazer", "ranger"):
            assert any(e.split == "train" and e.species == species for e in manifest.entries)

    def test_deterministic(self, synth_days, synth_holdout):
        first = make_manifest(synth_days, synth_holdout, seed=5)
        second = make_manifest(list(reversed(synth_days)), synth_holdout, seed=5)
        assert first.entries == second.entries
        assert first.counts() == second.counts()
        assert sum(first.counts().values()) == len(synth_days)

    def test_missing_holdout(self, synth_days):
        with pytest.raises(SplitError, match="No holdout"):
            make_manifest(synth_days, {"grazer": "S103"})

    def test_absent_holdout_study(self, synth_days, synth_holdout):
        with pytest.raises(SplitError, match="absent"):
            make_manifest(synth_days, {**synth_holdout, "ranger": "S999"})

    def test_holdout_for_unknown_species(self, synth_days, synth_holdout):
        with pytest.raises(SplitError, match="species absent from data: \\['granzer'\\]"):
            make_manifest(synth_days, {**synth_holdout, "granzer": "S103"})

    def test_single_study_requires_flag(self):
        with pytest.raises(SplitError, match="allow-within-study-test"):
            make_manifest(single_study_days(), {"zebra": "Z1"})

    def test_within_study_split(self):
        days = single_study_days()
        first = make_manifest(days, {"zebra": "*"}, seed=1, allow_within_study_test=True)
        second = make_manifest(days, {"zebra": "*"}, seed=2, allow_within_study_test=True)
        assert first.within_study == {"zebra"}
        assert first.keys("test") and first.keys("train")
        assert first.keys("test") == second.keys("test")
        assert audit_leakage(first, days).passed

    def test_single_animal_within_study(self):
        with pytest.raises(SplitError):
            make_manifest(single_study_days(n_animals=1), {}, allow_within_study_test=True)

    def test_indices_and_labels(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout)
        keys = [d.key for d in synth_days]
        parts = [manifest.indices(keys, split) for split in ("train", "val", "test")]
        assert sorted(np.concatenate(parts).tolist()) == list(range(len(keys)))
        labels = binary_labels(manifest, "grazer")
        assert sum(labels.values()) == sum(d.species == "grazer" for d in synth_days)

    def test_csv_round_trip(self, tmp_path, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout)
        restored = read_manifest_csv(write_manifest_csv(manifest, tmp_path / "manifest.csv"),
                                     holdout=synth_holdout)
        assert restored.entries == manifest.entries
        assert audit_leakage(restored, synth_days).passed


class TestAudit:
    def test_clean_manifest_passes(self, synth_days, synth_holdout):
        report = audit_leakage(make_manifest(synth_days, synth_holdout), synth_days)
        assert report.passed
        assert report.to_text().startswith("status = pass")

    def test_detects_seeded_corruptions(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout, seed=3)
        rng = np.random.default_rng(11)
        per_animal = {}
        for e in manifest.entries:
            per_animal[e.animal_id] = per_animal.get(e.animal_id, 0) + 1
        shared = [i for i, e in enumerate(manifest.entries) if per_animal[e.animal_id] > 1]
        for trial in range(100):
            entries = list(manifest.entries)
            kind = trial % 3
            if kind == 0:
                i = int(rng.choice(shared))
                other = [s for s in ("train", "val", "test") if s != entries[i].split]
                entries[i] = replace(entries[i], split=str(rng.choice(other)))
            else:
                animal = entries[int(rng.integers(len(entries)))].animal_id
                current = manifest.split_of(next(e.key for e in entries if e.animal_id == animal))
                moved = "train" if current == "test" else "test"
                entries = [replace(e, split=moved) if e.animal_id == animal else e
                           for e in entries]
                if kind == 2:
                    entries.remove(next(e for e in entries if e.animal_id == animal))
            corrupted = SplitManifest(entries, holdout=manifest.holdout, seed=manifest.seed)
            report = audit_leakage(corrupted, synth_days)
            assert not report.passed, f"corruption {trial} went unnoticed"
            assert report.violations

    def test_reports_missing_day(self, synth_days, synth_holdout):
        manifest = make_manifest(synth_days, synth_holdout)
        dropped = SplitManifest(manifest.entries[1:], holdout=manifest.holdout)
        report = audit_leakage(dropped, synth_days)
        assert manifest.entries[0].key in report.violating_keys
