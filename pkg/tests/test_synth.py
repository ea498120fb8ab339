import math

import numpy as np
import pytest

from wildtraj.core.errors import SchemaError
from wildtraj.core.ingest import group_tracks, ingest_files
from wildtraj.core.resample import resample_tracks
from wildtraj.core.synth import (
    Archetype,
    generate,
    load_archetypes,
    select_archetypes,
    synth_scenario,
    write_synth_csv,
)

RADIUS_M = 6_371_000.0


def walker(**params):
    base = dict(name="walker", step_mean_m=500.0, step_dispersion=0.5, kappa=1.0)
    base.update(params)
    return Archetype(**base)


def planar_steps(records):
    """Шаги в касательной плоскости: (north, east) в метрах"""
    lat = np.array([r.lat for r in records])
    lon = np.array([r.lon for r in records])
    north = np.radians(np.diff(lat)) * RADIUS_M
    east = np.radians(np.diff(lon)) * RADIUS_M * np.cos(np.radians(lat[:-1]))
    return north, east


class TestGenerate:
    def test_one_day_hourly(self):
        records = generate(walker(), n_animals=1, n_days=1)
        assert len(records) == 24
        stamps = [r.timestamp for r in records]
        assert stamps == sorted(stamps)
        assert all(t % 3600 == 0 for t in stamps)

    def test_half_hourly(self):
        assert len(generate(walker(), n_animals=2, n_days=1, resolution=1800)) == 96

    def test_mean_step_length(self):
        records = generate(walker(), n_animals=1, n_days=60, seed=2)
        north, east = planar_steps(records)
        assert np.hypot(north, east).mean() == pytest.approx(500.0, rel=0.05)

    def test_deterministic(self):
        first = generate(walker(dropout=0.2, rest_probability=0.1), 2, 3, seed=5)
        second = generate(walker(dropout=0.2, rest_probability=0.1), 2, 3, seed=5)
        other = generate(walker(dropout=0.2, rest_probability=0.1), 2, 3, seed=6)
        assert first == second
        assert first != other

    def test_workers_match_sequential(self):
        assert generate(walker(), 3, 2, seed=1, workers=2) == generate(walker(), 3, 2, seed=1)

    def test_concentrated_turning(self):
        records = generate(walker(kappa=1e4, step_dispersion=0.0), 1, 3, seed=3)
        north, east = planar_steps(records)
        heading = np.arctan2(east, north)
        turns = np.angle(np.exp(1j * np.diff(heading)))
        assert np.abs(turns).max() < 0.1

    def test_uniform_turning(self):
        records = generate(walker(kappa=0.0), 1, 40, seed=4)
        north, east = planar_steps(records)
        turns = np.angle(np.exp(1j * np.diff(np.arctan2(east, north))))
        assert abs(np.cos(turns).mean()) < 0.1

    def test_rest_repeats_position(self):
        records = generate(walker(rest_probability=0.5, rest_mean_steps=3), 1, 5, seed=7)
        north, east = planar_steps(records)
        assert (np.hypot(north, east) == 0).sum() > 20

    def test_jitter_keeps_grid_node(self):
        records = generate(walker(), 1, 2, jitter=600, seed=8)
        offsets = [(r.timestamp + 1800) % 3600 - 1800 for r in records]
        assert max(abs(o) for o in offsets) <= 600
        assert any(offsets)
        days, _ = resample_tracks(group_tracks(records), 3600)
        assert all(day.obs_mask.all() for day in days)

    @pytest.mark.parametrize("kwargs", [
        {"center": (85.0, 0.0)}, {"n_days": 0}, {"jitter": 1800},
    ])
    def test_invalid_parameters(self, kwargs):
        params = {"n_animals": 1, "n_days": 1, **kwargs}
        with pytest.raises(SchemaError):
            generate(walker(), **params)

    def test_longitude_stays_in_range(self):
        records = generate(walker(step_mean_m=20000.0), 2, 3, center=(0.0, 179.9), seed=9)
        assert all(-180.0 < r.lon <= 180.0 for r in records)


class TestScenario:
    def test_bundled_archetypes(self):
        archetypes = load_archetypes()
        assert {"grazer", "ranger", "tortuous", "persistent"} <= set(archetypes)
        assert archetypes["persistent"].kappa > archetypes["tortuous"].kappa
        assert archetypes["grazer"].step_mean_sphere == pytest.approx(120 / RADIUS_M)

    def test_invalid_archetype_file(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("grazer.step_mean_m = -5\n")
        with pytest.raises(SchemaError):
            load_archetypes(path)
        path.write_text("grazer.unknown = 1\n")
        with pytest.raises(SchemaError):
            load_archetypes(path)

    def test_select(self):
        available = load_archetypes()
        assert set(select_archetypes(available, {})) == {"grazer", "ranger"}
        assert select_archetypes(available, {"elephant": "ranger"})["elephant"].name == "ranger"
        with pytest.raises(SchemaError):
            select_archetypes(available, {"elephant": "mammoth"})

    def test_holdout_and_regions(self):
        scenario = synth_scenario(select_archetypes(load_archetypes(), {}), n_studies=2,
                                  n_animals=2, n_days=1, seed=1)
        assert scenario.holdout == {"grazer": "S102", "ranger": "S202"}
        assert scenario.studies["ranger"] == ["S201", "S202"]
        assert {r.study_id for r in scenario.records} == {"S101", "S102", "S201", "S202"}

    def test_csv_ingests_cleanly(self, tmp_path):
        scenario = synth_scenario(select_archetypes(load_archetypes(), {}), n_studies=2,
                                  n_animals=2, n_days=2, seed=2, jitter=300)
        path = write_synth_csv(scenario.records, tmp_path / "synth.csv")
        (result,) = ingest_files([path])
        assert result.rejected == 0
        assert len(result.records) == len(scenario.records)
        assert result.records[0].timestamp == scenario.records[0].timestamp
        assert math.isclose(result.records[-1].lat, scenario.records[-1].lat, rel_tol=0, abs_tol=1e-12)
