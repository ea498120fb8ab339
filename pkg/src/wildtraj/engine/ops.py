"""Операции нейросетей поверх Tensor: у каждой есть прямой и обратный проход"""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ShapeError
from .tensor import Tensor, as_tensor

MASK_FILL = -1e9
_GELU_C = math.sqrt(2.0 / math.pi)

Grads = List[Tuple[Tensor, np.ndarray]]


# ----- поэлементные -----

def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return Tensor.from_op(np.where(active, x.data, 0.0), (x,), "relu",
                          lambda g: [(x, g * active)])


def gelu(x: Tensor) -> Tensor:
    """GELU в tanh-приближении"""
    u = _GELU_C * (x.data + 0.044715 * x.data ** 3)
    t = np.tanh(u)
    out = 0.5 * x.data * (1.0 + t)

    def backward(g: np.ndarray) -> Grads:
        du = _GELU_C * (1.0 + 3 * 0.044715 * x.data ** 2)
        return [(x, g * (0.5 * (1.0 + t) + 0.5 * x.data * (1.0 - t ** 2) * du))]

    return Tensor.from_op(out, (x,), "gelu", backward)


def sigmoid(x: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor.from_op(out, (x,), "sigmoid", lambda g: [(x, g * out * (1.0 - out))])


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor.from_op(out, (x,), "tanh", lambda g: [(x, g * (1.0 - out ** 2))])


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor.from_op(out, (x,), "exp", lambda g: [(x, g * out)])


def log(x: Tensor) -> Tensor:
    return Tensor.from_op(np.log(x.data), (x,), "log", lambda g: [(x, g / x.data)])


ACTIVATIONS = {"relu": relu, "gelu": gelu, "tanh": tanh, "sigmoid": sigmoid}


def activation(x: Tensor, name: str) -> Tensor:
    try:
        return ACTIVATIONS[name](x)
    except KeyError:
        raise ValueError(f"Unknown activation {name!r}, expected one of {list(ACTIVATIONS)}") from None


# ----- маски и пулинг -----

def mask_time(x: Tensor, mask: np.ndarray) -> Tensor:
    """
    Обнуляет шаги паддинга: x (B, T, C), mask (B, T).

    Значения на шагах паддинга заменяются нулём, а не умножаются на 0,
    поэтому их содержимое (включая NaN) на результат не влияет.
    """
    keep = np.asarray(mask).astype(bool)[..., None]
    if keep.shape[:2] != x.shape[:2]:
        raise ShapeError("mask_time", x.shape, np.shape(mask))
    return Tensor.from_op(np.where(keep, x.data, 0.0), (x,), "mask_time",
                          lambda g: [(x, np.where(keep, g, 0.0))])


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Среднее по времени только по наблюдённым шагам: (B, T, C) -> (B, C); без шагов -> 0"""
    keep = np.asarray(mask).astype(bool)
    if keep.shape != x.shape[:2]:
        raise ShapeError("masked_mean", x.shape, keep.shape)
    count = np.maximum(keep.sum(axis=1), 1).astype(x.data.dtype)[:, None]
    out = np.where(keep[..., None], x.data, 0.0).sum(axis=1) / count

    def backward(g: np.ndarray) -> Grads:
        return [(x, np.where(keep[..., None], (g / count)[:, None, :], 0.0))]

    return Tensor.from_op(out, (x,), "masked_mean", backward)


def empty_rows(keep: np.ndarray) -> np.ndarray:
    """Строки маски без единого разрешённого ключа"""
    return ~np.asarray(keep).astype(bool).any(axis=-1)


def softmax(x: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
    """
    Softmax по последней оси с необязательной маской ключей.

    К запрещённым ключам добавляется -1e9, затем вероятности запрещённых
    ключей обнуляются и строка перенормируется. Строка без разрешённых ключей
    даёт нули (см. empty_rows), а не NaN.

    Args:
        x: Логиты
        keep: Маска, broadcastable к x; 1 - ключ разрешён

    Returns:
        Tensor: Вероятности
    """
    z = x.data
    allowed = None
    if keep is not None:
        allowed = np.broadcast_to(np.asarray(keep).astype(bool), z.shape)
        z = np.where(allowed, z, z + MASK_FILL)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    if allowed is not None:
        e = np.where(allowed, e, 0.0)
    total = e.sum(axis=-1, keepdims=True)
    out = e / np.where(total > 0, total, 1.0)

    def backward(g: np.ndarray) -> Grads:
        return [(x, out * (g - (g * out).sum(axis=-1, keepdims=True)))]

    return Tensor.from_op(out, (x,), "softmax", backward)


# ----- нормализация -----

def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Нормализация по последней оси с обучаемыми масштабом и сдвигом"""
    if gamma.shape != (x.shape[-1],) or beta.shape != gamma.shape:
        raise ShapeError("layer_norm", x.shape, gamma.shape, beta.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(x.data.var(axis=-1, keepdims=True) + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data

    def backward(g: np.ndarray) -> Grads:
        n = x.shape[-1]
        d = g * gamma.data
        dx = inv / n * (n * d - d.sum(axis=-1, keepdims=True)
                        - xhat * (d * xhat).sum(axis=-1, keepdims=True))
        lead = tuple(range(x.ndim - 1))
        return [(x, dx), (gamma, (g * xhat).sum(axis=lead)), (beta, g.sum(axis=lead))]

    return Tensor.from_op(out, (x, gamma, beta), "layer_norm", backward)


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, groups: int,
               mask: Optional[np.ndarray] = None, eps: float = 1e-5) -> Tensor:
    """
    Group Normalization для (B, T, C); статистики группы только по наблюдённым шагам.

    Нормализованы все шаги, включая паддинг, но на среднее и дисперсию влияют
    только шаги с mask = 1.

    Args:
        x: Активации (B, T, C)
        gamma, beta: Масштаб и сдвиг по каналам (C,)
        groups: Число групп, делит C
        mask: Маска наблюдений (B, T) или None
        eps: Добавка к дисперсии
    """
    batch, steps, channels = x.shape
    if channels % groups or gamma.shape != (channels,) or beta.shape != (channels,):
        raise ShapeError("group_norm", x.shape, gamma.shape, (groups,))
    width = channels // groups
    xg = x.data.reshape(batch, steps, groups, width)
    if mask is None:
        m = np.ones((batch, steps, 1, 1), dtype=x.data.dtype)
    else:
        m = np.asarray(mask).astype(x.data.dtype).reshape(batch, steps, 1, 1)
    n = np.maximum(m.sum(axis=1, keepdims=True) * width, 1.0)
    mu = (xg * m).sum(axis=(1, 3), keepdims=True) / n
    centered = xg - mu
    var = (m * centered ** 2).sum(axis=(1, 3), keepdims=True) / n
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = xhat.reshape(batch, steps, channels) * gamma.data + beta.data

    def backward(g: np.ndarray) -> Grads:
        d = (g * gamma.data).reshape(batch, steps, groups, width)
        sum_d = d.sum(axis=(1, 3), keepdims=True)
        sum_dx = (d * xhat).sum(axis=(1, 3), keepdims=True)
        dx = d * inv - m * (inv / n) * (sum_d + xhat * sum_dx)
        flat = xhat.reshape(batch, steps, channels)
        return [(x, dx.reshape(batch, steps, channels)),
                (gamma, (g * flat).sum(axis=(0, 1))),
                (beta, g.sum(axis=(0, 1)))]

    return Tensor.from_op(out, (x, gamma, beta), "group_norm", backward)


# ----- свёртка -----

def conv_padding(kernel: int, dilation: int, mode: str) -> Tuple[int, int]:
    """Паддинг (слева, справа) по времени: causal - весь слева, same - поровну"""
    total = (kernel - 1) * dilation
    if mode == "causal":
        return total, 0
    if mode == "same":
        return total // 2, total - total // 2
    raise ValueError(f"Unknown padding mode {mode!r}")


def conv1d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, dilation: int = 1,
           padding: str = "same") -> Tensor:
    """
    Одномерная свёртка по времени в раскладке (B, T, C_in), вес (K, C_in, C_out).

    Causal: выход в момент t зависит только от входов <= t.
    """
    if x.ndim != 3 or weight.ndim != 3 or weight.shape[1] != x.shape[2]:
        raise ShapeError("conv1d", x.shape, weight.shape)
    kernel = weight.shape[0]
    steps = x.shape[1]
    left, right = conv_padding(kernel, dilation, padding)
    xp = np.pad(x.data, ((0, 0), (left, right), (0, 0)))
    out = np.zeros((x.shape[0], steps, weight.shape[2]), dtype=x.data.dtype)
    for k in range(kernel):
        out += xp[:, k * dilation:k * dilation + steps, :] @ weight.data[k]
    parents: Tuple[Tensor, ...] = (x, weight)
    if bias is not None:
        out += bias.data
        parents = (x, weight, bias)

    def backward(g: np.ndarray) -> Grads:
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(weight.data)
        for k in range(kernel):
            window = slice(k * dilation, k * dilation + steps)
            gxp[:, window, :] += g @ weight.data[k].T
            gw[k] = np.tensordot(xp[:, window, :], g, axes=([0, 1], [0, 1]))
        grads = [(x, gxp[:, left:left + steps, :]), (weight, gw)]
        if bias is not None:
            grads.append((bias, g.sum(axis=(0, 1))))
        return grads

    return Tensor.from_op(out, parents, f"conv1d_{padding}", backward)


# ----- прочее -----

def dropout(x: Tensor, p: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Инвертированный dropout; p = 0 или режим оценки - тождество"""
    if not training or p <= 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs a seeded generator")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    return Tensor.from_op(x.data * keep, (x,), "dropout", lambda g: [(x, g * keep)])


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g: np.ndarray) -> Grads:
        return list(zip(tensors, np.split(g, bounds, axis=axis)))

    return Tensor.from_op(out, tuple(tensors), "concat", backward)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("stack", *[t.shape for t in tensors]) from None

    def backward(g: np.ndarray) -> Grads:
        return [(t, np.take(g, i, axis=axis)) for i, t in enumerate(tensors)]

    return Tensor.from_op(out, tuple(tensors), "stack", backward)


def where(condition: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Выбор по постоянной маске: condition ? a : b"""
    cond = np.asarray(condition).astype(bool)
    out = np.where(cond, a.data, b.data)
    return Tensor.from_op(out, (a, b), "where",
                          lambda g: [(a, np.where(cond, g, 0.0)), (b, np.where(cond, 0.0, g))])


def log_softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(logits: Tensor, labels: np.ndarray,
                  class_weights: Optional[np.ndarray] = None) -> Tensor:
    """
    Взвешенная кросс-энтропия: sum_i w_{y_i} * (-log p_{y_i}) / sum_i w_{y_i}

    Args:
        logits: (N, K)
        labels: Целые метки (N,)
        class_weights: Веса классов (K,) или None (все 1)
    """
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy", logits.shape, labels.shape)
    n_classes = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    weights = np.ones(n_classes) if class_weights is None else np.asarray(class_weights, float)
    if weights.shape != (n_classes,):
        raise ShapeError("cross_entropy weights", weights.shape, (n_classes,))
    logp = log_softmax(logits.data)
    rows = np.arange(labels.size)
    w = weights[labels].astype(logits.data.dtype)
    total = w.sum()
    if total <= 0:
        raise ValueError("cross_entropy over an empty batch")
    out = np.asarray(-(w * logp[rows, labels]).sum() / total)

    def backward(g: np.ndarray) -> Grads:
        grad = np.exp(logp)
        grad[rows, labels] -= 1.0
        return [(logits, g * grad * (w / total)[:, None])]

    return Tensor.from_op(out, (logits,), "cross_entropy", backward)
