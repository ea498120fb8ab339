"""Многоветвевая одномерная CNN"""

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from ..utils.config import ModelConfig
from .base_model import Module, ModelMetadata, SequenceClassifier
from .layers import Conv1d, Dropout, GroupNorm, Linear
from .registry import register_model


class ConvBranch(Module):
    """conv (same) -> GroupNorm по наблюдённым шагам -> нелинейность"""

    def __init__(self, in_channels: int, filters: int, kernel: int, groups: int,
                 activation: str, rng: np.random.Generator):
        self.conv = Conv1d(in_channels, filters, kernel, rng, padding="same")
        self.norm = GroupNorm(groups, filters)
        self.activation = activation

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tensor:
        return ops.activation(self.norm(self.conv(x), mask), self.activation)


@register_model("cnn1d")
class CNN1DClassifier(SequenceClassifier):
    """Параллельные ветви с ядрами 3, 5, 7 -> конкатенация -> маскированное среднее -> голова"""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        rng = self.init_rng
        self.branches = [
            ConvBranch(config.n_features, config.cnn_filters, k, config.cnn_groups,
                       config.conv_activation, rng)
            for k in config.cnn_kernels
        ]
        self.dropout = Dropout(config.dropout)
        self.head = Linear(config.cnn_filters * len(config.cnn_kernels), config.num_classes, rng)

    @classmethod
    def get_metadata(cls) -> ModelMetadata:
        return ModelMetadata(name="cnn1d",
                             description="Multi-branch 1D CNN with GroupNorm and masked pooling")

    def encode(self, x: Tensor, mask: np.ndarray) -> Tensor:
        features = ops.concat([branch(x, mask) for branch in self.branches], axis=-1)
        pooled = ops.masked_mean(features, mask)
        return self.head(self.dropout(pooled, self.dropout_rng))
