import hashlib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, Union, get_args, get_origin

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..core.errors import SchemaError
from .logging import setup_logger


logger = setup_logger(__name__)

Resolution = Literal["1h", "30m"]
FeatureMode = Literal["minimal", "augmented"]
Arch = Literal["transformer", "lstm", "cnn1d", "tcn"]

RESOLUTION_SECONDS: Dict[str, int] = {"1h": 3600, "30m": 1800}
FEATURE_SCHEMAS: Dict[str, str] = {"minimal": "minimal5", "augmented": "augmented10"}


class TrainConfig(BaseModel):
    """Параметры обучения; значения по умолчанию воспроизводят опубликованный протокол"""
    model_config = ConfigDict(extra="forbid")

    lr: float = Field(3e-4, gt=0)
    weight_decay: float = Field(1e-4, ge=0)
    clip_norm: float = Field(1.0, gt=0)
    batch_size: int = Field(128, ge=1)
    max_epochs: int = Field(50, ge=1)
    early_stop_patience: int = Field(6, ge=1)
    plateau_factor: float = Field(0.5, gt=0, lt=1)
    plateau_patience: int = Field(2, ge=1)
    min_lr: float = Field(1e-5, gt=0)
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = Field(1e-8, gt=0)
    improvement_threshold: float = Field(1e-5, ge=0)
    max_steps: Optional[int] = Field(None, ge=1)
    seed: int = 0

    @field_validator("betas")
    @classmethod
    def _check_betas(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in value):
            raise ValueError(f"betas must lie in [0, 1): {value}")
        return value


class ModelConfig(BaseModel):
    """Архитектура и гиперпараметры классификатора"""
    model_config = ConfigDict(extra="forbid")

    arch: Arch = "transformer"
    n_features: int = Field(10, ge=1)
    seq_len: int = Field(24, ge=1)
    num_classes: int = Field(2, ge=2)
    dropout: float = Field(0.1, ge=0, lt=1)
    seed: int = 0
    # transformer
    d_model: int = Field(64, ge=2)
    n_layers: int = Field(2, ge=1)
    n_heads: int = Field(4, ge=1)
    ff_dim: int = Field(256, ge=1)
    activation: Literal["gelu", "relu", "tanh"] = "gelu"
    positional_encoding: bool = True
    # lstm
    lstm_hidden: int = Field(64, ge=1)
    lstm_layers: int = Field(2, ge=1)
    # cnn1d
    cnn_kernels: List[int] = Field(default_factory=lambda: [3, 5, 7])
    cnn_filters: int = Field(64, ge=1)
    cnn_groups: int = Field(8, ge=1)
    # tcn
    tcn_channels: int = Field(64, ge=1)
    tcn_kernel: int = Field(3, ge=1)
    tcn_dilations: List[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    tcn_dropout: float = Field(0.2, ge=0, lt=1)
    conv_activation: Literal["gelu", "relu", "tanh"] = "relu"

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelConfig":
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if self.cnn_filters % self.cnn_groups:
            raise ValueError(
                f"cnn_filters={self.cnn_filters} is not divisible by cnn_groups={self.cnn_groups}"
            )
        return self


class RunConfig(BaseModel):
    """Конфигурация эксперимента: файл key=value, поверх него флаги CLI"""
    model_config = ConfigDict(extra="forbid")

    inputs: List[str] = Field(default_factory=list)
    sidecar: Optional[str] = None
    study_id: Optional[str] = None
    species_label: Optional[str] = None
    tz_offset: Optional[str] = None
    resolution: Resolution = "1h"
    features: FeatureMode = "augmented"
    arch: Arch = "transformer"
    species: List[str] = Field(default_factory=list)
    holdout: Dict[str, str] = Field(default_factory=dict)
    seed: int = 0
    val_fraction: float = Field(0.2, gt=0, lt=1)
    test_fraction: float = Field(0.2, gt=0, lt=1)
    standardize: bool = True
    allow_within_study_test: bool = False
    workers: int = Field(1, ge=1)
    record_timing: bool = False
    out: str = "runs"
    # синтетический сценарий
    synth_config: Optional[str] = None
    synth_species: Dict[str, str] = Field(default_factory=dict)
    synth_studies: int = Field(3, ge=1)
    synth_animals: int = Field(4, ge=1)
    synth_days: int = Field(10, ge=1)
    train: TrainConfig = Field(default_factory=TrainConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)

    @property
    def resolution_seconds(self) -> int:
        return RESOLUTION_SECONDS[self.resolution]

    @property
    def schema_name(self) -> str:
        return FEATURE_SCHEMAS[self.features]

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None,
             overrides: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """
        Загружает конфигурацию из файла и накладывает переопределения

        Args:
            path: Путь к файлу key=value (опционально)
            overrides: Плоский словарь переопределений (ключи с точками для train./model.)

        Returns:
            RunConfig: Проверенная конфигурация

        Raises:
            SchemaError: Неизвестный ключ или недопустимое значение
        """
        data: Dict[str, Any] = {}
        if path is not None:
            for key, value in read_kv_file(path):
                _assign(data, key, value, append=True)
            logger.debug("Loaded run config from %s", path)
        for key, value in (overrides or {}).items():
            if value is not None:
                _assign(data, key, value, append=False)
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise SchemaError(f"Invalid configuration: {e}") from e

    def to_text(self) -> str:
        """Детерминированное текстовое эхо конфигурации (перечитывается через load)"""
        lines: List[str] = []
        for key, value in _flatten(self.model_dump()):
            if isinstance(value, dict):
                for sub_key in sorted(value):
                    lines.append(f"{key} = {sub_key}={value[sub_key]}")
            elif isinstance(value, (list, tuple)):
                lines.append(f"{key} = {','.join(str(v) for v in value)}")
            elif value is None:
                continue
            else:
                lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]

    def save(self, directory: Union[str, Path]) -> Path:
        """Сохраняет эхо конфигурации в config.txt"""
        target = Path(directory)
        target.mkdir(parents=True, exist_ok=True)
        config_file = target / "config.txt"
        config_file.write_text(self.to_text(), encoding="utf-8")
        logger.debug("Saved configuration to %s", config_file)
        return config_file


def read_kv_file(path: Union[str, Path]) -> List[Tuple[str, str]]:
    """
    Читает файл key=value

    Пустые строки и строки, начинающиеся с '#', пропускаются.
    Разделитель - первый знак '='.

    Raises:
        SchemaError: Файл отсутствует или строка без '='
    """
    config_file = Path(path)
    if not config_file.exists():
        raise SchemaError(f"Config file not found: {config_file}")
    pairs: List[Tuple[str, str]] = []
    for lineno, raw in enumerate(config_file.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"{config_file}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    return pairs


def parse_mapping(value: Union[str, Iterable[str], Dict[str, str]]) -> Dict[str, str]:
    """'A=x,B=y' или список 'A=x' -> словарь"""
    if isinstance(value, dict):
        return dict(value)
    items = value.split(",") if isinstance(value, str) else list(value)
    mapping: Dict[str, str] = {}
    for item in items:
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise SchemaError(f"Expected KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        mapping[key.strip()] = val.strip()
    return mapping


def _field_kind(model: type, name: str) -> Optional[type]:
    field = model.model_fields.get(name)
    if field is None:
        return None
    annotation = field.annotation
    origin = get_origin(annotation)
    if origin is Union:
        args = [a for a in get_args(annotation) if a is not type(None)]
        origin = get_origin(args[0]) if args else None
    return origin


def _assign(data: Dict[str, Any], key: str, value: Any, append: bool) -> None:
    model: type = RunConfig
    target = data
    parts = key.split(".")
    for part in parts[:-1]:
        field = model.model_fields.get(part)
        if field is None or not isinstance(field.annotation, type) \
                or not issubclass(field.annotation, BaseModel):
            raise SchemaError(f"Unknown config section: {part!r} in {key!r}")
        model = field.annotation
        target = target.setdefault(part, {})
    name = parts[-1]
    if name not in model.model_fields:
        raise SchemaError(f"Unknown config key: {key!r}")
    kind = _field_kind(model, name)
    if kind is dict:
        mapping = parse_mapping(value)
        if append:
            target.setdefault(name, {}).update(mapping)
        else:
            target[name] = {**target.get(name, {}), **mapping}
    elif kind in (list, tuple) and isinstance(value, str):
        target[name] = [v.strip() for v in value.split(",") if v.strip()]
    else:
        target[name] = value


def _flatten(data: Dict[str, Any], prefix: str = "") -> List[Tuple[str, Any]]:
    items: List[Tuple[str, Any]] = []
    for key in sorted(data):
        value = data[key]
        full = f"{prefix}{key}"
        if isinstance(value, dict) and key in ("train", "model") and not prefix:
            items.extend(_flatten(value, prefix=f"{key}."))
        else:
            items.append((full, value))
    return items
