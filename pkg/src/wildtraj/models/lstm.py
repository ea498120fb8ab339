"""Многослойный LSTM с переносом состояния через шаги паддинга"""

from typing import List, Tuple

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from ..utils.config import ModelConfig
from .base_model import Module, ModelMetadata, Parameter, SequenceClassifier, uniform_init
from .layers import Dropout, Linear
from .registry import register_model


class LSTMLayer(Module):
    """
    Один слой LSTM (гейты i, f, g, o).

    На шаге с m_t = 0 состояние (h, c) переносится без изменений.
    """

    def __init__(self, input_size: int, hidden: int, rng: np.random.Generator):
        self.hidden = hidden
        self.input_weight = Parameter(uniform_init(rng, (input_size, 4 * hidden), hidden))
        self.hidden_weight = Parameter(uniform_init(rng, (hidden, 4 * hidden), hidden))
        self.bias = Parameter(uniform_init(rng, (4 * hidden,), hidden))

    def __call__(self, x: Tensor, mask: np.ndarray) -> Tuple[Tensor, Tensor]:
        batch, steps, _ = x.shape
        size = self.hidden
        h = Tensor(np.zeros((batch, size)))
        c = Tensor(np.zeros((batch, size)))
        keep = np.asarray(mask).astype(bool)
        outputs: List[Tensor] = []
        for t in range(steps):
            gates = x[:, t, :] @ self.input_weight + h @ self.hidden_weight + self.bias
            i = ops.sigmoid(gates[:, :size])
            f = ops.sigmoid(gates[:, size:2 * size])
            g = ops.tanh(gates[:, 2 * size:3 * size])
            o = ops.sigmoid(gates[:, 3 * size:])
            c_next = f * c + i * g
            h_next = o * ops.tanh(c_next)
            observed = keep[:, t:t + 1]
            c = ops.where(observed, c_next, c)
            h = ops.where(observed, h_next, h)
            outputs.append(h)
        return ops.stack(outputs, axis=1), h


@register_model("lstm")
class LSTMClassifier(SequenceClassifier):
    """Классификация по состоянию на последнем наблюдённом шаге верхнего слоя"""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        rng = self.init_rng
        sizes = [config.n_features] + [config.lstm_hidden] * config.lstm_layers
        self.layers = [LSTMLayer(sizes[i], sizes[i + 1], rng) for i in range(config.lstm_layers)]
        self.dropout = Dropout(config.dropout)
        self.head = Linear(config.lstm_hidden, config.num_classes, rng)

    @classmethod
    def get_metadata(cls) -> ModelMetadata:
        return ModelMetadata(name="lstm", description="Stacked LSTM with masked state carry")

    def encode(self, x: Tensor, mask: np.ndarray) -> Tensor:
        sequence = x
        final = None
        for index, layer in enumerate(self.layers):
            if index:
                sequence = self.dropout(sequence, self.dropout_rng)
            sequence, final = layer(sequence, mask)
        return self.head(self.dropout(final, self.dropout_rng))
