"""Transformer-энкодер с токеном классификации"""

import numpy as np

from ..engine import ops
from ..engine.tensor import Tensor
from ..utils.config import ModelConfig
from .base_model import Module, ModelMetadata, Parameter, SequenceClassifier
from .layers import Dropout, FeedForward, LayerNorm, Linear, MultiHeadAttention, sinusoidal_encoding
from .registry import register_model


class EncoderLayer(Module):
    """Pre-norm слой: h += MHA(LN(h)); h += FFN(LN(h))"""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.attn_norm = LayerNorm(config.d_model)
        self.attention = MultiHeadAttention(config.d_model, config.n_heads, rng)
        self.ff_norm = LayerNorm(config.d_model)
        self.feed_forward = FeedForward(config.d_model, config.ff_dim, rng, config.activation)
        self.dropout = Dropout(config.dropout)

    def __call__(self, h: Tensor, key_mask: np.ndarray, rng: np.random.Generator) -> Tensor:
        h = h + self.dropout(self.attention(self.attn_norm(h), key_mask), rng)
        return h + self.dropout(self.feed_forward(self.ff_norm(h)), rng)


@register_model("transformer")
class TransformerClassifier(SequenceClassifier):
    """
    z_t = W x_t + b + PE(t) для t = 0..T-1; перед последовательностью ставится
    обучаемый токен [CLS] с PE(0). Маска ключей - m, расширенная всегда
    наблюдённым слотом CLS. Классификация по финальному представлению CLS.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        rng = self.init_rng
        d = config.d_model
        self.embed = Linear(config.n_features, d, rng)
        self.cls_token = Parameter(np.zeros((1, 1, d)))
        self.layers = [EncoderLayer(config, rng) for _ in range(config.n_layers)]
        self.final_norm = LayerNorm(d)
        self.head = Linear(d, config.num_classes, rng)
        self.embed_dropout = Dropout(config.dropout)
        self.positional = (sinusoidal_encoding(config.seq_len, d) if config.positional_encoding
                           else np.zeros((config.seq_len, d)))

    @classmethod
    def get_metadata(cls) -> ModelMetadata:
        return ModelMetadata(name="transformer",
                             description="Pre-norm transformer encoder with a [CLS] token")

    def encode(self, x: Tensor, mask: np.ndarray) -> Tensor:
        batch = x.shape[0]
        z = self.embed(x) + Tensor(self.positional[None])
        cls = self.cls_token * Tensor(np.ones((batch, 1, 1))) + Tensor(self.positional[None, :1])
        h = self.embed_dropout(ops.concat([cls, z], axis=1), self.dropout_rng)
        key_mask = np.concatenate([np.ones((batch, 1)), np.asarray(mask, dtype=float)], axis=1)
        for layer in self.layers:
            h = layer(h, key_mask, self.dropout_rng)
        return self.head(self.final_norm(h)[:, 0, :])
