"""
Формат контрольной точки TRJM.

magic 'TRJM', version u32, блок метаданных (u32 длина + UTF-8 текст key=value:
model.*, norm.*, meta.*), число параметров u32, затем записи параметров:
имя (u32 длина + UTF-8), ndim u32, размеры u32, значения float32 little-endian
по строкам.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from ..core.errors import SchemaError
from ..core.features import NormStats
from ..utils.config import ModelConfig
from ..utils.logging import setup_logger
from .base_model import SequenceClassifier
from .registry import create_model

logger = setup_logger(__name__)

CHECKPOINT_MAGIC = b"TRJM"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    """Загруженная контрольная точка"""
    model: SequenceClassifier
    norm_stats: Optional[NormStats] = None
    meta: Dict[str, str] = field(default_factory=dict)


def _config_lines(config: ModelConfig) -> List[str]:
    lines = []
    for key, value in sorted(config.model_dump().items()):
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"model.{key} = {value}")
    return lines


def metadata_text(model: SequenceClassifier, norm_stats: Optional[NormStats] = None,
                  meta: Optional[Dict[str, str]] = None) -> str:
    lines = _config_lines(model.config)
    if norm_stats is not None:
        lines.extend(norm_stats.to_text().splitlines())
    for key in sorted(meta or {}):
        lines.append(f"meta.{key} = {meta[key]}")
    return "\n".join(lines) + "\n"


def _parse_metadata(text: str) -> Tuple[ModelConfig, Optional[NormStats], Dict[str, str]]:
    model_values: Dict[str, object] = {}
    norm_lines: List[str] = []
    meta: Dict[str, str] = {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("model."):
            name = key[len("model."):]
            field_info = ModelConfig.model_fields.get(name)
            if field_info is not None and "List" in str(field_info.annotation):
                model_values[name] = [v for v in value.split(",") if v]
            else:
                model_values[name] = value
        elif key.startswith("norm."):
            norm_lines.append(line)
        elif key.startswith("meta."):
            meta[key[len("meta."):]] = value
    try:
        config = ModelConfig.model_validate(model_values)
    except ValidationError as e:
        raise SchemaError(f"Checkpoint carries an invalid model config: {e}") from e
    norm = NormStats.from_text("\n".join(norm_lines)) if norm_lines else None
    return config, norm, meta


def _write_str(handle: BinaryIO, text: str) -> None:
    data = text.encode("utf-8")
    handle.write(struct.pack("<I", len(data)))
    handle.write(data)


def _read_exact(handle: BinaryIO, n: int) -> bytes:
    data = handle.read(n)
    if len(data) != n:
        raise SchemaError("Truncated checkpoint")
    return data


def _read_str(handle: BinaryIO) -> str:
    (length,) = struct.unpack("<I", _read_exact(handle, 4))
    return _read_exact(handle, length).decode("utf-8")


def save_checkpoint(model: SequenceClassifier, path: Union[str, Path],
                    norm_stats: Optional[NormStats] = None,
                    meta: Optional[Dict[str, str]] = None) -> Path:
    """
    Сохраняет модель, статистики нормировки и произвольные метаданные

    Args:
        model: Модель
        path: Файл .trjm
        norm_stats: Статистики стандартизации признаков
        meta: Дополнительные пары (например, целевой вид)

    Returns:
        Path: Путь к файлу
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    named = model.named_parameters()
    with target.open("wb") as handle:
        handle.write(CHECKPOINT_MAGIC)
        handle.write(struct.pack("<I", CHECKPOINT_VERSION))
        _write_str(handle, metadata_text(model, norm_stats, meta))
        handle.write(struct.pack("<I", len(named)))
        for name, param in named:
            _write_str(handle, name)
            handle.write(struct.pack("<I", param.ndim))
            handle.write(struct.pack(f"<{param.ndim}I", *param.shape))
            handle.write(np.ascontiguousarray(param.data, dtype="<f4").tobytes())
    logger.debug("Saved %s checkpoint with %d tensors to %s", model.name, len(named), target)
    return target


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """
    Восстанавливает модель из TRJM

    Raises:
        SchemaError: Неверная сигнатура, версия или набор параметров
    """
    with Path(path).open("rb") as handle:
        if handle.read(4) != CHECKPOINT_MAGIC:
            raise SchemaError(f"{path}: not a TRJM checkpoint")
        (version,) = struct.unpack("<I", _read_exact(handle, 4))
        if version != CHECKPOINT_VERSION:
            raise SchemaError(f"{path}: unsupported checkpoint version {version}")
        config, norm, meta = _parse_metadata(_read_str(handle))
        (count,) = struct.unpack("<I", _read_exact(handle, 4))
        state: Dict[str, np.ndarray] = {}
        for _ in range(count):
            name = _read_str(handle)
            (ndim,) = struct.unpack("<I", _read_exact(handle, 4))
            shape = struct.unpack(f"<{ndim}I", _read_exact(handle, 4 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            values = np.frombuffer(_read_exact(handle, 4 * size), dtype="<f4")
            state[name] = values.reshape(shape)
    model = create_model(config)
    model.load_state_dict(state)
    model.eval()
    return Checkpoint(model=model, norm_stats=norm, meta=meta)
