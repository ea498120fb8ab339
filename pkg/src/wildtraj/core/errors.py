"""Иерархия исключений и коды возврата CLI"""

from typing import Any, List, Optional


class WildtrajError(Exception):
    """Базовая ошибка пайплайна; exit_code уходит в код возврата CLI"""
    exit_code: int = 1


class SchemaError(WildtrajError, ValueError):
    """Нарушена схема входных данных или конфигурации"""
    exit_code = 2


class CorruptInputError(SchemaError):
    """Отброшено больше допустимой доли строк"""

    def __init__(self, message: str, rejected: int = 0, total: int = 0):
        super().__init__(message)
        self.rejected = rejected
        self.total = total


class SplitError(WildtrajError, ValueError):
    """Разбиение невозможно построить (нет holdout-исследования, нет данных для обучения)"""
    exit_code = 2


class LeakageError(WildtrajError):
    """Манифест не прошёл аудит утечек"""
    exit_code = 3

    def __init__(self, message: str, report: Optional[Any] = None):
        super().__init__(message)
        self.report = report


class TrainingDivergedError(WildtrajError, ArithmeticError):
    """Функция потерь стала не конечной"""
    exit_code = 4

    def __init__(self, message: str, lr: float = float("nan"),
                 batch_index: int = -1, grad_norm: float = float("nan")):
        super().__init__(
            f"{message} (lr={lr:.3e}, batch={batch_index}, grad_norm={grad_norm:.3e})"
        )
        self.lr = lr
        self.batch_index = batch_index
        self.grad_norm = grad_norm


class ShapeError(ValueError):
    """Несовместимые формы тензоров"""

    def __init__(self, op: str, *shapes: Any):
        shown: List[str] = [str(tuple(s)) for s in shapes]
        super().__init__(f"{op}: incompatible shapes {' vs '.join(shown)}")
        self.shapes = shapes
