"""Проверка градиентов центральными конечными разностями"""

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..utils.logging import setup_logger
from .tensor import Tensor, no_grad, precision

logger = setup_logger(__name__)


@dataclass
class GradcheckResult:
    """
    Итог проверки.

    Attributes:
        passed: Все проверенные тензоры в пределах допуска
        errors: Имя тензора -> относительная ошибка в max-норме
        tolerance: Допуск
    """
    passed: bool
    errors: Dict[str, float] = field(default_factory=dict)
    tolerance: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)


def gradcheck(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    tolerance: float = 1e-4,
    skip_below: float = 1e-8,
    max_elements: Optional[int] = None,
    seed: int = 0,
) -> GradcheckResult:
    """
    Сравнивает градиенты обратного прохода с центральными разностями в float64.

    Для каждого тензора ошибка = max|g_a - g_n| / max(max|g_a|, max|g_n|);
    тензоры с max|g| < skip_below пропускаются.

    Args:
        fn: Функция без аргументов, возвращающая скаляр; читает inputs
        inputs: Листья, по которым проверяется градиент (на время проверки в float64,
            затем исходный dtype)
        h: Шаг разностей
        tolerance: Допустимая относительная ошибка
        skip_below: Порог малых градиентов
        max_elements: Проверять не более стольких элементов тензора (случайная выборка)
        seed: Зерно выборки элементов

    Returns:
        GradcheckResult: Результат
    """
    rng = np.random.default_rng(seed)
    result = GradcheckResult(passed=True, tolerance=tolerance)
    dtypes = [tensor.data.dtype for tensor in inputs]
    try:
        _check(fn, inputs, h, skip_below, max_elements, rng, result)
    finally:
        for tensor, dtype in zip(inputs, dtypes):
            tensor.data = tensor.data.astype(dtype)
            if tensor.grad is not None:
                tensor.grad = tensor.grad.astype(dtype)
    return result


def _check(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float, skip_below: float,
           max_elements: Optional[int], rng: np.random.Generator,
           result: GradcheckResult) -> None:
    tolerance = result.tolerance
    with precision(np.float64):
        for tensor in inputs:
            tensor.data = tensor.data.astype(np.float64)
            tensor.requires_grad = True
            tensor.zero_grad()
        loss = fn()
        loss.backward()
        for index, tensor in enumerate(inputs):
            name = tensor.name or f"input{index}"
            analytic = np.zeros_like(tensor.data) if tensor.grad is None else tensor.grad
            flat = tensor.data.reshape(-1)
            positions = np.arange(flat.size)
            if max_elements is not None and flat.size > max_elements:
                positions = np.sort(rng.choice(flat.size, size=max_elements, replace=False))
            numeric = np.zeros(positions.size)
            with no_grad():
                for j, pos in enumerate(positions):
                    original = flat[pos]
                    flat[pos] = original + h
                    plus = fn().item()
                    flat[pos] = original - h
                    minus = fn().item()
                    flat[pos] = original
                    numeric[j] = (plus - minus) / (2.0 * h)
            picked = analytic.reshape(-1)[positions]
            scale = max(np.abs(picked).max(initial=0.0), np.abs(numeric).max(initial=0.0))
            if scale < skip_below:
                continue
            error = float(np.abs(picked - numeric).max() / scale)
            result.errors[name] = error
            if error >= tolerance:
                result.passed = False
                logger.warning("Gradient mismatch for %s: relative error %.3e", name, error)
