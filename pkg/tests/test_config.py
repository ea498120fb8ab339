import logging
from datetime import timedelta, timezone

import pytest
from pydantic import ValidationError

from wildtraj.core.errors import SchemaError
from wildtraj.utils.config import ModelConfig, RunConfig, TrainConfig, parse_mapping, read_kv_file
from wildtraj.utils.logging import level_from_flags
from wildtraj.utils.timezone import get_timezone, parse_utc_offset

CONFIG_TEXT = """
# эксперимент
resolution = 30m
features = minimal
arch = tcn
holdout = grazer=S103
holdout = ranger=S203
species = grazer,ranger
train.lr = 0.001
train.betas = 0.8,0.99
model.tcn_dilations = 1,2
"""


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text(CONFIG_TEXT, encoding="utf-8")
    return path


def test_defaults():
    config = RunConfig()
    assert (config.resolution, config.features, config.arch) == ("1h", "augmented", "transformer")
    assert config.resolution_seconds == 3600
    assert config.schema_name == "augmented10"
    assert config.train.batch_size == 128 and config.train.max_epochs == 50
    assert config.model.tcn_dilations == [1, 2, 4, 8]


def test_load_file(config_file):
    config = RunConfig.load(config_file)
    assert config.resolution_seconds == 1800
    assert config.schema_name == "minimal5"
    assert config.holdout == {"grazer": "S103", "ranger": "S203"}
    assert config.species == ["grazer", "ranger"]
    assert config.train.lr == 0.001
    assert config.train.betas == (0.8, 0.99)
    assert config.model.tcn_dilations == [1, 2]


def test_overrides_win(config_file):
    config = RunConfig.load(config_file, {"arch": "lstm", "seed": 9, "holdout": {"ranger": "S201"},
                                          "train.max_epochs": "3", "features": None})
    assert config.arch == "lstm"
    assert config.features == "minimal"
    assert config.holdout == {"grazer": "S103", "ranger": "S201"}
    assert config.train.max_epochs == 3


@pytest.mark.parametrize("overrides", [
    {"unknown": "1"}, {"nested.lr": "1"}, {"train.momentum": "0.9"}, {"resolution": "15m"},
    {"val_fraction": "1.5"}, {"model.n_heads": "3"}, {"train.betas": "0.9,1.0"},
])
def test_invalid_values(overrides):
    with pytest.raises(SchemaError):
        RunConfig.load(overrides=overrides)


def test_text_round_trip(tmp_path, config_file):
    config = RunConfig.load(config_file, {"synth_species": "elephant=ranger"})
    restored = RunConfig.load(config.save(tmp_path / "echo"))
    assert restored == config
    assert restored.fingerprint() == config.fingerprint()
    assert RunConfig.load(config_file, {"seed": 1}).fingerprint() != config.fingerprint()


def test_kv_file_errors(tmp_path):
    with pytest.raises(SchemaError):
        read_kv_file(tmp_path / "missing.conf")
    bad = tmp_path / "bad.conf"
    bad.write_text("resolution 1h\n")
    with pytest.raises(SchemaError, match="bad.conf:1"):
        read_kv_file(bad)


def test_parse_mapping():
    assert parse_mapping("a=1, b=2") == {"a": "1", "b": "2"}
    assert parse_mapping(["x=S1=2"]) == {"x": "S1=2"}
    with pytest.raises(SchemaError):
        parse_mapping("novalue")


def test_model_config_shapes():
    with pytest.raises(ValidationError):
        ModelConfig(d_model=10, n_heads=4)
    with pytest.raises(ValidationError):
        ModelConfig(cnn_filters=10, cnn_groups=4)
    with pytest.raises(ValidationError):
        TrainConfig(unknown=1)


def test_timezones():
    assert get_timezone() is timezone.utc
    assert parse_utc_offset("+02:00").utcoffset(None) == timedelta(hours=2)
    assert parse_utc_offset("UTC-0530").utcoffset(None) == -timedelta(hours=5, minutes=30)
    assert get_timezone("Africa/Nairobi").key == "Africa/Nairobi"
    with pytest.raises(ValueError):
        get_timezone("Mars/Olympus")
    with pytest.raises(ValueError):
        parse_utc_offset("+15:00")


def test_log_levels():
    assert level_from_flags(verbose=True) == logging.DEBUG
    assert level_from_flags(quiet=True) == logging.WARNING
    assert level_from_flags() == logging.INFO
