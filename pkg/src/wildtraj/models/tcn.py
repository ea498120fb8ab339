"""Temporal Convolutional Network: остаточные блоки с расширенными причинными свёртками"""

from typing import Optional, Sequence

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from ..utils.config import ModelConfig
from .base_model import Module, ModelMetadata, SequenceClassifier
from .layers import Conv1d, Dropout, Linear
from .registry import register_model


class TemporalBlock(Module):
    """
    Две причинные свёртки с dilation, dropout после каждой, остаток (1x1 при
    смене числа каналов). Выход повторно маскируется.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel: int, dilation: int,
                 dropout: float, activation: str, rng: np.random.Generator):
        self.conv1 = Conv1d(in_channels, out_channels, kernel, rng, dilation, padding="causal")
        self.conv2 = Conv1d(out_channels, out_channels, kernel, rng, dilation, padding="causal")
        self.downsample: Optional[Linear] = (
            Linear(in_channels, out_channels, rng) if in_channels != out_channels else None
        )
        self.dropout = Dropout(dropout)
        self.activation = activation

    def __call__(self, x: Tensor, mask: np.ndarray, rng: np.random.Generator) -> Tensor:
        h = self.dropout(ops.activation(self.conv1(x), self.activation), rng)
        h = self.dropout(ops.activation(self.conv2(h), self.activation), rng)
        residual = x if self.downsample is None else self.downsample(x)
        return ops.mask_time(ops.activation(h + residual, self.activation), mask)


def receptive_field(kernel: int, dilations: Sequence[int]) -> int:
    """1 + 2 * (k - 1) * sum(d)"""
    return 1 + 2 * (kernel - 1) * sum(dilations)


@register_model("tcn")
class TCNClassifier(SequenceClassifier):
    """Блоки с dilation 1, 2, 4, 8 -> маскированное среднее -> голова"""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        rng = self.init_rng
        channels = [config.n_features] + [config.tcn_channels] * len(config.tcn_dilations)
        self.blocks = [
            TemporalBlock(channels[i], channels[i + 1], config.tcn_kernel, dilation,
                          config.tcn_dropout, config.conv_activation, rng)
            for i, dilation in enumerate(config.tcn_dilations)
        ]
        self.head = Linear(config.tcn_channels, config.num_classes, rng)

    @classmethod
    def get_metadata(cls) -> ModelMetadata:
        return ModelMetadata(name="tcn", description="Dilated causal TCN with masked mean pooling")

    def temporal_features(self, x: Tensor, mask: np.ndarray) -> Tensor:
        """Активации последнего блока до пулинга, (B, T, C)"""
        h = ops.mask_time(x, mask)
        for block in self.blocks:
            h = block(h, mask, self.dropout_rng)
        return h

    def encode(self, x: Tensor, mask: np.ndarray) -> Tensor:
        return self.head(ops.masked_mean(self.temporal_features(x, mask), mask))
