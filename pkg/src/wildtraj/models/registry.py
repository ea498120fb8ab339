from typing import Callable, Dict, List, Optional, Type

from ..core.errors import SchemaError
from ..utils.config import ModelConfig
from ..utils.logging import setup_logger
from .base_model import SequenceClassifier

logger = setup_logger(__name__)


class ModelRegistry:
    """Реестр архитектур: имя -> класс классификатора"""

    def __init__(self) -> None:
        self._model_classes: Dict[str, Type[SequenceClassifier]] = {}

    def register_model_class(self, name: str, model_class: Type[SequenceClassifier]) -> None:
        """
        Регистрирует класс модели

        Raises:
            ValueError: Имя уже занято другим классом
        """
        existing = self._model_classes.get(name)
        if existing is not None and existing is not model_class:
            raise ValueError(f"Model {name} already registered")
        self._model_classes[name] = model_class

    def get_model_class(self, name: str) -> Type[SequenceClassifier]:
        if name not in self._model_classes:
            raise SchemaError(f"Unknown architecture {name!r}, available: {self.available()}")
        return self._model_classes[name]

    def available(self) -> List[str]:
        return sorted(self._model_classes)

    def create(self, config: ModelConfig) -> SequenceClassifier:
        """Создаёт модель по config.arch"""
        model = self.get_model_class(config.arch)(config)
        logger.debug("Created %s with %d parameters", config.arch, model.n_parameters())
        return model


registry = ModelRegistry()


def register_model(name: str) -> Callable[[Type[SequenceClassifier]], Type[SequenceClassifier]]:
    """Декоратор регистрации архитектуры в общем реестре"""

    def decorator(model_class: Type[SequenceClassifier]) -> Type[SequenceClassifier]:
        registry.register_model_class(name, model_class)
        return model_class

    return decorator


def create_model(config: ModelConfig, model_registry: Optional[ModelRegistry] = None) -> SequenceClassifier:
    # Импорт регистрирует все встроенные архитектуры
    from . import cnn1d, lstm, tcn, transformer  # noqa: F401

    return (model_registry or registry).create(config)
