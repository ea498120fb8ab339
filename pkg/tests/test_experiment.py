import statistics

import pytest

from wildtraj.evaluation import read_report
from wildtraj.experiment import run_all
from wildtraj.utils.config import ModelConfig, RunConfig, TrainConfig


@pytest.mark.slow
def test_transformer_separates_synthetic_archetypes_on_held_out_studies(tmp_path):
    config = RunConfig(
        out=str(tmp_path),
        synth_species={"grazer": "grazer", "ranger": "ranger"},
        synth_studies=3,
        resolution="1h",
        features="augmented",
        arch="transformer",
        seed=11,
        model=ModelConfig(d_model=32, n_layers=2, n_heads=4, ff_dim=64),
        train=TrainConfig(lr=1e-3, batch_size=32, max_epochs=30),
    )
    outcomes = run_all(config, quiet=True)

    assert sorted(o.target for o in outcomes) == ["grazer", "ranger"]
    assert (tmp_path / "data_1h" / "config.txt").exists()
    for outcome in outcomes:
        report = read_report(outcome.directory)
        assert report["arch"] == "transformer"
        assert report["features"] == "augmented10"
        assert float(report["balanced_acc"]) >= 0.85, report
        assert float(report["auc"]) >= 0.90, report
        # только отложенные исследования обоих видов
        assert set(k.split(".")[1] for k in report if k.startswith("per_study.")) == {"S103", "S203"}


def _persistent_balanced_accuracy(out, features, seed):
    config = RunConfig(
        out=str(out),
        synth_species={"tortuous": "tortuous", "persistent": "persistent"},
        species=["persistent"],
        features=features,
        arch="tcn",
        seed=seed,
        # ядро 1: каждый шаг кодируется отдельно, повороты видны только в колонках turn_*
        model=ModelConfig(tcn_kernel=1, tcn_dilations=[1], tcn_channels=16, tcn_dropout=0.0,
                          dropout=0.0),
        train=TrainConfig(lr=3e-3, batch_size=32, max_epochs=15),
    )
    (outcome,) = run_all(config, quiet=True)
    return float(read_report(outcome.directory)["balanced_acc"])


@pytest.mark.slow
def test_augmented_features_separate_matched_turning_pair(tmp_path):
    gains = []
    for seed in range(5):
        out = tmp_path / f"seed{seed}"
        minimal = _persistent_balanced_accuracy(out, "minimal", seed)
        augmented = _persistent_balanced_accuracy(out, "augmented", seed)
        gains.append(augmented - minimal)
    assert statistics.median(gains) >= 0.05, gains
