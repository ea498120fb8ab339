"""Тензор с лентой операций для обратного дифференцирования"""

from contextlib import contextmanager
from typing import Any, Callable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..core.errors import ShapeError

DEFAULT_DTYPE = np.float32

_dtype: type = DEFAULT_DTYPE
_grad_enabled = True

ArrayLike = Union["Tensor", np.ndarray, float, int]
Backward = Callable[[np.ndarray], List[Tuple["Tensor", np.ndarray]]]


def get_dtype() -> type:
    return _dtype


def is_grad_enabled() -> bool:
    return _grad_enabled


@contextmanager
def precision(dtype: Any) -> Iterator[None]:
    """Временная смена вещественного типа (float64 используется для проверки градиентов)"""
    global _dtype
    previous = _dtype
    _dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _dtype = previous


@contextmanager
def no_grad() -> Iterator[None]:
    """Вычисления без записи на ленту"""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Суммирует градиент по осям, добавленным или растянутым при broadcasting"""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """
    Плотный массив numpy и, при requires_grad, узел ленты.

    Attributes:
        data: Значения (float32 по умолчанию, float64 внутри precision)
        grad: Накопленный градиент той же формы или None
        requires_grad: Нужен ли градиент
        name: Имя (для параметров)
    """

    def __init__(self, data: Any, requires_grad: bool = False, name: str = ""):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=_dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Backward] = None
        self._op = ""

    # ----- свойства -----

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float("nan")

    def __repr__(self) -> str:
        suffix = f", op={self._op}" if self._op else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{suffix})"

    def __len__(self) -> int:
        return self.shape[0]

    # ----- лента -----

    @staticmethod
    def from_op(data: np.ndarray, parents: Sequence["Tensor"], op: str,
                backward: Backward) -> "Tensor":
        """Результат операции; родители и обратная функция пишутся на ленту при необходимости"""
        requires = _grad_enabled and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=requires)
        out._op = op
        if requires:
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def accumulate(self, grad: np.ndarray) -> None:
        if not self.requires_grad:
            return
        grad = unbroadcast(np.asarray(grad), self.shape)
        if self.grad is None:
            self.grad = np.array(grad, dtype=self.data.dtype, copy=True)
        else:
            self.grad = self.grad + grad

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def _topological_order(self) -> List["Tensor"]:
        # Итеративный обход: глубина графа LSTM превышает лимит рекурсии
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """
        Обратный проход от этого узла.

        Вклады в каждый узел суммируются до его обработки, поэтому градиент
        параметра пополняется ровно один раз за проход.

        Args:
            grad: Начальный градиент; для скаляра по умолчанию 1

        Raises:
            ShapeError: Неявный начальный градиент для нескалярного тензора
        """
        if grad is None:
            if self.size != 1:
                raise ShapeError("backward without explicit grad", self.shape)
            grad = np.ones_like(self.data)
        pending = {id(self): np.asarray(grad, dtype=self.data.dtype)}
        for node in reversed(self._topological_order()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.accumulate(g)
                continue
            for parent, parent_grad in node._backward(g):
                if not parent.requires_grad:
                    continue
                parent_grad = unbroadcast(np.asarray(parent_grad), parent.shape)
                key = id(parent)
                pending[key] = pending[key] + parent_grad if key in pending else parent_grad

    # ----- арифметика -----

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> "Tensor":
        return div(other, self)

    def __neg__(self) -> "Tensor":
        return neg(self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __pow__(self, exponent: float) -> "Tensor":
        return power(self, exponent)

    def __getitem__(self, index: Any) -> "Tensor":
        return getitem(self, index)

    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None,
            keepdims: bool = False) -> "Tensor":
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None,
             keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else int(np.prod(
            [self.shape[a] for a in np.atleast_1d(axis)]))
        return tensor_sum(self, axis, keepdims) * (1.0 / count)

    def reshape(self, *shape: int) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        return transpose(self, axes or None)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return Tensor.from_op(a.data + b.data, (a, b), "add", lambda g: [(a, g), (b, g)])


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return Tensor.from_op(a.data - b.data, (a, b), "sub", lambda g: [(a, g), (b, -g)])


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), "neg", lambda g: [(a, -g)])


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return Tensor.from_op(a.data * b.data, (a, b), "mul",
                          lambda g: [(a, g * b.data), (b, g * a.data)])


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    out = a.data / b.data
    return Tensor.from_op(out, (a, b), "div",
                          lambda g: [(a, g / b.data), (b, -g * out / b.data)])


def power(a: Tensor, exponent: float) -> Tensor:
    return Tensor.from_op(a.data ** exponent, (a,), "pow",
                          lambda g: [(a, g * exponent * a.data ** (exponent - 1))])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Матричное произведение по двум последним осям с broadcasting ведущих (до 4 осей)"""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", a.shape, b.shape)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeError("matmul", a.shape, b.shape) from None

    def backward(g: np.ndarray) -> List[Tuple[Tensor, np.ndarray]]:
        return [(a, np.matmul(g, np.swapaxes(b.data, -1, -2))),
                (b, np.matmul(np.swapaxes(a.data, -1, -2), g))]

    return Tensor.from_op(out, (a, b), "matmul", backward)


def tensor_sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None,
               keepdims: bool = False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g: np.ndarray) -> List[Tuple[Tensor, np.ndarray]]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return [(a, np.broadcast_to(g, a.shape))]

    return Tensor.from_op(out, (a,), "sum", backward)


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError("reshape", a.shape, shape) from None
    return Tensor.from_op(out, (a,), "reshape", lambda g: [(a, g.reshape(a.shape))])


def transpose(a: Tensor, axes: Optional[Tuple[int, ...]] = None) -> Tensor:
    out = np.transpose(a.data, axes)
    inverse = None if axes is None else tuple(np.argsort(axes))
    return Tensor.from_op(out, (a,), "transpose", lambda g: [(a, np.transpose(g, inverse))])


def getitem(a: Tensor, index: Any) -> Tensor:
    out = a.data[index]

    def backward(g: np.ndarray) -> List[Tuple[Tensor, np.ndarray]]:
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return [(a, full)]

    return Tensor.from_op(np.array(out), (a,), "getitem", backward)
