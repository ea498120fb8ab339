"""Базовые классы моделей: параметры, модули и классификатор последовательностей"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from ..core.errors import SchemaError, ShapeError
from ..engine.ops import cross_entropy, mask_time
from ..engine.tensor import Tensor, no_grad
from ..utils.config import ModelConfig
from ..utils.logging import setup_logger

logger = setup_logger(__name__)


@dataclass
class ModelMetadata:
    """Метаданные архитектуры"""
    name: str
    description: str = ""
    version: str = "1.0.0"


class Parameter(Tensor):
    """Обучаемый тензор"""

    def __init__(self, data: Any, name: str = ""):
        super().__init__(data, requires_grad=True, name=name)


def uniform_init(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in))"""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """
    Контейнер параметров и подмодулей.

    Параметры находятся по атрибутам экземпляра (Parameter, Module и списки
    модулей) в порядке их создания.
    """

    training: bool = True

    def _children(self) -> Iterator[Tuple[str, Any]]:
        for name, value in vars(self).items():
            if isinstance(value, (Parameter, Module)):
                yield name, value
            elif isinstance(value, (list, tuple)) and value and isinstance(value[0], Module):
                for i, item in enumerate(value):
                    yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Parameter]]:
        """Пары (путь, параметр); путь записывается в Parameter.name для диагностики"""
        found: List[Tuple[str, Parameter]] = []
        for name, child in self._children():
            full = f"{prefix}{name}"
            if isinstance(child, Parameter):
                child.name = full
                found.append((full, child))
            else:
                found.extend(child.named_parameters(prefix=f"{full}."))
        return found

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> List["Module"]:
        found: List[Module] = [self]
        for _, child in self._children():
            if isinstance(child, Module):
                found.extend(child.modules())
        return found

    def train(self, mode: bool = True) -> "Module":
        for module in self.modules():
            module.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """
        Загружает значения параметров

        Raises:
            SchemaError: Набор имён или формы не совпадают
        """
        named = dict(self.named_parameters())
        if set(named) != set(state):
            missing = sorted(set(named) - set(state))
            extra = sorted(set(state) - set(named))
            raise SchemaError(f"State mismatch: missing {missing}, unexpected {extra}")
        for name, p in named.items():
            value = np.asarray(state[name])
            if value.shape != p.shape:
                raise SchemaError(f"Parameter {name}: expected shape {p.shape}, got {value.shape}")
            p.data = value.astype(p.data.dtype, copy=True)

    def astype(self, dtype: Any) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.zero_grad()
        return self


class SequenceClassifier(Module, ABC):
    """
    Базовый класс классификаторов суток: (B, T, F) и маска (B, T) -> логиты (B, K).

    Наследник реализует encode; вход предварительно обнуляется на шагах
    паддинга, поэтому их содержимое не влияет на логиты.
    """

    def __init__(self, config: ModelConfig):
        self.config = config
        self.init_rng = np.random.default_rng([config.seed, 0])
        self.dropout_rng = np.random.default_rng([config.seed, 1])
        self.diagnostics: Dict[str, int] = {"all_padding": 0}

    @classmethod
    @abstractmethod
    def get_metadata(cls) -> ModelMetadata:
        """Метаданные архитектуры"""

    @abstractmethod
    def encode(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """
        Логиты по замаскированному входу

        Args:
            x: (B, T, F), шаги паддинга равны 0
            mask: (B, T) из {0, 1}

        Returns:
            Tensor: (B, K)
        """

    @property
    def name(self) -> str:
        return self.get_metadata().name

    def forward(self, x: Union[Tensor, np.ndarray], mask: np.ndarray) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        mask = np.asarray(mask)
        expected = (self.config.seq_len, self.config.n_features)
        if x.ndim != 3 or x.shape[1:] != expected or mask.shape != x.shape[:2]:
            raise ShapeError(f"{self.name} forward", x.shape, mask.shape, expected)
        empty = int((mask.sum(axis=1) == 0).sum())
        if empty:
            self.diagnostics["all_padding"] += empty
            logger.debug("%s: %d input(s) without observed steps", self.name, empty)
        return self.encode(mask_time(x, mask), mask)

    def __call__(self, x: Union[Tensor, np.ndarray], mask: np.ndarray) -> Tensor:
        return self.forward(x, mask)

    def loss(self, x: Union[Tensor, np.ndarray], mask: np.ndarray, labels: np.ndarray,
             class_weights: Optional[np.ndarray] = None) -> Tensor:
        return cross_entropy(self.forward(x, mask), labels, class_weights)

    def logits(self, x: np.ndarray, mask: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Логиты без записи на ленту, по пакетам"""
        chunks = []
        with no_grad():
            for start in range(0, x.shape[0], batch_size):
                chunks.append(self.forward(x[start:start + batch_size],
                                           mask[start:start + batch_size]).data)
        if not chunks:
            return np.zeros((0, self.config.num_classes), dtype=np.float64)
        return np.concatenate(chunks, axis=0)

    def predict_proba(self, x: np.ndarray, mask: np.ndarray, batch_size: int = 256) -> np.ndarray:
        logits = self.logits(x, mask, batch_size).astype(np.float64)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)
