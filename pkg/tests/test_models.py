import numpy as np
import pytest

from wildtraj.core.errors import SchemaError, ShapeError
from wildtraj.core.features import NormStats
from wildtraj.engine import Tensor, gradcheck
from wildtraj.models import (
    ModelRegistry,
    TransformerClassifier,
    create_model,
    load_checkpoint,
    registry,
    save_checkpoint,
)
from wildtraj.models.layers import sinusoidal_encoding
from wildtraj.models.tcn import TCNClassifier, receptive_field

ARCHES = ["transformer", "lstm", "cnn1d", "tcn"]


def batch(config, seed=0, n=3):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, config.seq_len, config.n_features))
    mask = np.ones((n, config.seq_len), dtype=np.uint8)
    mask[0, [1, 4, 5]] = 0
    if n > 1:
        mask[1, -3:] = 0
    return x, mask


def build(config, arch, **update):
    return create_model(config.model_copy(update={"arch": arch, **update}))


@pytest.mark.parametrize("arch", ARCHES)
class TestArchitectures:
    def test_output_shape(self, small_model_config, arch):
        model = build(small_model_config, arch)
        x, mask = batch(small_model_config)
        assert model(x, mask).shape == (3, 2)
        proba = model.predict_proba(x, mask)
        np.testing.assert_allclose(proba.sum(axis=1), 1.0)

    def test_padding_content_is_ignored(self, small_model_config, arch):
        model = build(small_model_config, arch)
        x, mask = batch(small_model_config)
        reference = model.logits(x, mask)
        noisy = x.copy()
        noisy[mask == 0] = np.random.default_rng(5).normal(100.0, 50.0, size=noisy[mask == 0].shape)
        np.testing.assert_array_equal(model.logits(noisy, mask), reference)
        noisy[mask == 0] = np.nan
        np.testing.assert_array_equal(model.logits(noisy, mask), reference)

    def test_all_padding_input(self, small_model_config, arch):
        model = build(small_model_config, arch)
        x, _ = batch(small_model_config, n=1)
        logits = model.logits(x, np.zeros((1, small_model_config.seq_len)))
        assert np.isfinite(logits).all()
        assert model.diagnostics["all_padding"] == 1

    def test_wrong_shape(self, small_model_config, arch):
        model = build(small_model_config, arch)
        with pytest.raises(ShapeError):
            model(np.zeros((2, small_model_config.seq_len, 3)), np.ones((2, small_model_config.seq_len)))

    def test_same_seed_same_weights(self, small_model_config, arch):
        first = build(small_model_config, arch).state_dict()
        second = build(small_model_config, arch).state_dict()
        assert first.keys() == second.keys()
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_gradients(self, small_model_config, arch):
        model = build(small_model_config, arch)
        x, mask = batch(small_model_config)
        labels = np.array([0, 1, 1])
        weights = np.array([0.8, 1.4])
        result = gradcheck(lambda: model.loss(x, mask, labels, weights), model.parameters(),
                           max_elements=12, tolerance=1e-4)
        assert result.passed, result.errors
        assert result.errors
        assert set(result.errors) <= {name for name, _ in model.named_parameters()}
        for param in model.parameters():
            assert param.data.dtype == np.float32
            assert param.grad is None or param.grad.dtype == np.float32

    def test_checkpoint_round_trip(self, tmp_path, small_model_config, arch):
        model = build(small_model_config, arch)
        x, mask = batch(small_model_config)
        stats = NormStats("minimal5", np.array([0.1, 0.2, 0.3]), np.array([1.0, 2.0, 3.0]))
        path = save_checkpoint(model, tmp_path / "model.trjm", stats, {"target": "grazer"})
        restored = load_checkpoint(path)
        assert restored.model.name == arch
        assert restored.model.config == model.config
        assert restored.meta == {"target": "grazer"}
        np.testing.assert_array_equal(restored.norm_stats.std, stats.std)
        np.testing.assert_array_equal(restored.model.logits(x, mask), model.logits(x, mask))


class TestTransformer:
    def test_time_permutation_invariance_without_positions(self, small_model_config):
        model = build(small_model_config, "transformer", positional_encoding=False)
        x, mask = batch(small_model_config)
        order = np.random.default_rng(1).permutation(small_model_config.seq_len)
        np.testing.assert_allclose(model.logits(x[:, order], mask[:, order]), model.logits(x, mask),
                                   rtol=1e-4, atol=1e-5)

    def test_positions_break_permutation_invariance(self, small_model_config):
        model = build(small_model_config, "transformer")
        x, mask = batch(small_model_config)
        order = np.arange(small_model_config.seq_len)[::-1]
        assert not np.allclose(model.logits(x[:, order], mask[:, order]), model.logits(x, mask))

    def test_cls_token_uses_first_position(self, small_model_config):
        model = build(small_model_config, "transformer")
        assert isinstance(model, TransformerClassifier)
        expected = np.tile([0.0, 1.0], small_model_config.d_model // 2)
        np.testing.assert_allclose(model.positional[0], expected)
        np.testing.assert_allclose(model.positional,
                                   sinusoidal_encoding(small_model_config.seq_len,
                                                       small_model_config.d_model), rtol=1e-6)
        np.testing.assert_allclose(sinusoidal_encoding(3, 4)[1],
                                   [np.sin(1.0), np.cos(1.0), np.sin(0.01), np.cos(0.01)])


class TestLSTM:
    def test_trailing_padding_matches_truncation(self, small_model_config):
        long_model = build(small_model_config, "lstm")
        short_model = build(small_model_config, "lstm", seq_len=5)
        x, _ = batch(small_model_config, n=2)
        mask = np.ones((2, 8))
        mask[:, 5:] = 0
        np.testing.assert_allclose(long_model.logits(x, mask),
                                   short_model.logits(x[:, :5], np.ones((2, 5))),
                                   rtol=1e-6, atol=1e-7)


class TestTCN:
    def test_receptive_field(self):
        assert receptive_field(3, [1, 2, 4, 8]) == 61
        assert receptive_field(2, [1, 2]) == 7

    def test_causal_features(self, small_model_config):
        model = build(small_model_config, "tcn")
        assert isinstance(model, TCNClassifier)
        x, _ = batch(small_model_config, n=1)
        mask = np.ones((1, small_model_config.seq_len))
        before = model.temporal_features(Tensor(x), mask).data
        x[0, 5:] += 3.0
        after = model.temporal_features(Tensor(x), mask).data
        np.testing.assert_array_equal(before[0, :5], after[0, :5])
        assert not np.allclose(before[0, 5:], after[0, 5:])


class TestRegistry:
    def test_builtin_architectures(self, small_model_config):
        create_model(small_model_config)
        assert registry.available() == ["cnn1d", "lstm", "tcn", "transformer"]

    def test_unknown_architecture(self):
        with pytest.raises(SchemaError):
            ModelRegistry().get_model_class("gru")

    def test_conflicting_registration(self):
        local = ModelRegistry()
        local.register_model_class("tcn", TCNClassifier)
        local.register_model_class("tcn", TCNClassifier)
        with pytest.raises(ValueError):
            local.register_model_class("tcn", TransformerClassifier)

    def test_state_mismatch(self, small_model_config):
        model = build(small_model_config, "lstm")
        state = model.state_dict()
        state.pop(next(iter(state)))
        with pytest.raises(SchemaError):
            model.load_state_dict(state)

    def test_corrupt_checkpoint(self, tmp_path):
        path = tmp_path / "broken.trjm"
        path.write_bytes(b"TRJX\x01\x00\x00\x00")
        with pytest.raises(SchemaError):
            load_checkpoint(path)
