from datetime import date
from typing import Iterable, List, Optional

import numpy as np
import pytest

from wildtraj.core.features import movement_validity_from_mask
from wildtraj.core.ingest import group_tracks
from wildtraj.core.resample import resample_tracks
from wildtraj.core.synth import load_archetypes, select_archetypes, synth_scenario
from wildtraj.core.types import OBSERVED, SLOTS_PER_DAY, UNDEFINED, AnimalTrack, DailySequence, FixRecord
from wildtraj.engine.tensor import Tensor
from wildtraj.utils.config import ModelConfig


def make_track(stamps: Iterable[int], lats: Optional[Iterable[float]] = None,
               lons: Optional[Iterable[float]] = None, animal_id: str = "a1",
               study_id: str = "S1", species: str = "elephant") -> AnimalTrack:
    stamps = list(stamps)
    lats = list(lats) if lats is not None else [0.01 * i for i in range(len(stamps))]
    lons = list(lons) if lons is not None else [30.0 + 0.01 * i for i in range(len(stamps))]
    fixes = [FixRecord(animal_id, study_id, species, int(t), float(la), float(lo))
             for t, la, lo in zip(stamps, lats, lons)]
    return AnimalTrack(animal_id, study_id, species, fixes)


def make_day(defined: Iterable[int], resolution: int = 3600, animal_id: str = "a1",
             study_id: str = "S1", species: str = "elephant", day: date = date(2021, 1, 1),
             seed: int = 0) -> DailySequence:
    n_slots = SLOTS_PER_DAY[resolution]
    rng = np.random.default_rng(seed)
    origin = np.full(n_slots, UNDEFINED, dtype=np.uint8)
    origin[list(defined)] = OBSERVED
    obs_mask = (origin != UNDEFINED).astype(np.uint8)
    lat = np.where(obs_mask == 1, -1.0 + np.cumsum(rng.normal(0, 0.01, n_slots)), np.nan)
    lon = np.where(obs_mask == 1, 30.0 + np.cumsum(rng.normal(0, 0.01, n_slots)), np.nan)
    return DailySequence(animal_id, study_id, species, day, resolution, lat, lon, obs_mask,
                         movement_validity_from_mask(obs_mask), origin)


@pytest.fixture(scope="session")
def synth_days() -> List[DailySequence]:
    """Два архетипа, три исследования на вид, по три особи на 4 суток"""
    archetypes = select_archetypes(load_archetypes(), {})
    scenario = synth_scenario(archetypes, n_studies=3, n_animals=3, n_days=4, seed=7)
    days, _ = resample_tracks(group_tracks(scenario.records), 3600)
    return days


@pytest.fixture(scope="session")
def synth_holdout() -> dict:
    return {"grazer": "S103", "ranger": "S203"}


@pytest.fixture
def small_model_config() -> ModelConfig:
    """Маленькие модели для проверок градиента"""
    return ModelConfig(
        n_features=5, seq_len=8, d_model=8, n_layers=1, n_heads=2, ff_dim=12,
        lstm_hidden=6, lstm_layers=2, cnn_kernels=[3, 5], cnn_filters=4, cnn_groups=2,
        tcn_channels=6, tcn_kernel=2, tcn_dilations=[1, 2], dropout=0.0, tcn_dropout=0.0,
        activation="tanh", conv_activation="tanh", seed=3,
    )


def random_tensor(rng: np.random.Generator, *shape: int, scale: float = 1.0) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)
