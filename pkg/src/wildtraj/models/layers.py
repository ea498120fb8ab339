"""Слои моделей поверх операций движка"""

import math
from typing import Optional

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from .base_model import Module, Parameter, uniform_init


class Linear(Module):
    """y = x W + b, W: (in, out)"""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 bias: bool = True):
        self.weight = Parameter(uniform_init(rng, (in_features, out_features), in_features))
        self.bias = Parameter(uniform_init(rng, (out_features,), in_features)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        return out + self.bias if self.bias is not None else out


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, self.gamma, self.beta, self.eps)


class GroupNorm(Module):
    """GroupNorm по каналам (B, T, C) с маской наблюдений"""

    def __init__(self, groups: int, channels: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.groups = groups
        self.eps = eps

    def __call__(self, x: Tensor, mask: Optional[np.ndarray] = None) -> Tensor:
        return ops.group_norm(x, self.gamma, self.beta, self.groups, mask, self.eps)


class Conv1d(Module):
    """Свёртка по времени (B, T, C_in) -> (B, T, C_out); padding: 'same' или 'causal'"""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, dilation: int = 1, padding: str = "same"):
        fan_in = kernel_size * in_channels
        self.weight = Parameter(uniform_init(rng, (kernel_size, in_channels, out_channels), fan_in))
        self.bias = Parameter(uniform_init(rng, (out_channels,), fan_in))
        self.dilation = dilation
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight, self.bias, self.dilation, self.padding)


class Dropout(Module):
    def __init__(self, p: float):
        self.p = p

    def __call__(self, x: Tensor, rng: Optional[np.random.Generator]) -> Tensor:
        return ops.dropout(x, self.p, self.training, rng)


class MultiHeadAttention(Module):
    """
    Многоголовое самовнимание softmax(Q K^T / sqrt(d_k)) V с маской ключей.

    Args:
        dim: Размерность модели d
        heads: Число голов, делит d
        rng: Генератор для инициализации
    """

    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if dim % heads:
            raise ValueError(f"dim={dim} is not divisible by heads={heads}")
        self.heads = heads
        self.head_dim = dim // heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)

    def _split(self, x: Tensor) -> Tensor:
        batch, steps, _ = x.shape
        return x.reshape(batch, steps, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, key_mask: np.ndarray) -> Tensor:
        batch, steps, dim = x.shape
        q = self._split(self.query(x))
        k = self._split(self.key(x))
        v = self._split(self.value(x))
        scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(self.head_dim))
        weights = ops.softmax(scores, keep=np.asarray(key_mask)[:, None, None, :])
        context = (weights @ v).transpose(0, 2, 1, 3).reshape(batch, steps, dim)
        return self.out(context)


class FeedForward(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator, activation: str = "gelu"):
        self.inner = Linear(dim, hidden, rng)
        self.outer = Linear(hidden, dim, rng)
        self.activation = activation

    def __call__(self, x: Tensor) -> Tensor:
        return self.outer(ops.activation(self.inner(x), self.activation))


def sinusoidal_encoding(positions: int, dim: int) -> np.ndarray:
    """
    PE(p, 2i) = sin(p / 10000^(2i/d)), PE(p, 2i+1) = cos(p / 10000^(2i/d))
    """
    pos = np.arange(positions, dtype=np.float64)[:, None]
    i = np.arange(0, dim, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((positions, dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : dim // 2])
    return pe
