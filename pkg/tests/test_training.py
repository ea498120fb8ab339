import numpy as np
import pandas as pd
import pytest

from wildtraj.core.errors import SplitError, TrainingDivergedError
from wildtraj.engine import Tensor, precision
from wildtraj.models import create_model
from wildtraj.training import (
    AdamW,
    EarlyStopping,
    ReduceLROnPlateau,
    Trainer,
    TrainingData,
    clip_grad_norm,
    compute_class_weights,
    write_history_csv,
)
from wildtraj.training.losses import weighted_cross_entropy_np
from wildtraj.utils.config import TrainConfig


def separable_data(config, n=24, seed=0, shift=1.5):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    x = rng.normal(size=(n, config.seq_len, config.n_features))
    x += shift * labels[:, None, None]
    mask = np.ones((n, config.seq_len), dtype=np.uint8)
    mask[::3, -2:] = 0
    return TrainingData(x, mask, labels)


class TestClassWeights:
    def test_inverse_frequency(self):
        weights = compute_class_weights(np.array([0] * 90 + [1] * 10))
        np.testing.assert_allclose(weights, [0.5556, 5.0], atol=1e-4)

    def test_balanced(self):
        np.testing.assert_allclose(compute_class_weights(np.array([0, 1, 1, 0])), [1.0, 1.0])

    def test_missing_class(self):
        with pytest.raises(SplitError):
            compute_class_weights(np.zeros(5, dtype=int))


class TestOptimizer:
    def test_adamw_first_step(self):
        with precision(np.float64):
            theta = Tensor([1.0], requires_grad=True)
            theta.grad = np.array([0.5])
            AdamW([theta], lr=3e-4, weight_decay=1e-4).step()
        assert theta.data[0] == pytest.approx(0.99969997, abs=1e-10)

    def test_missing_grad_only_decays(self):
        with precision(np.float64):
            theta = Tensor([2.0], requires_grad=True)
            AdamW([theta], lr=0.1, weight_decay=0.5).step()
        assert theta.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)

    def test_clip(self):
        a = Tensor([0.0, 0.0], requires_grad=True)
        a.grad = np.array([3.0, 4.0], dtype=np.float32)
        assert clip_grad_norm([a], 1.0) == pytest.approx(5.0)
        np.testing.assert_allclose(a.grad, [0.6, 0.8], rtol=1e-5)
        assert clip_grad_norm([a], 1.0) == pytest.approx(1.0, rel=1e-5)
        np.testing.assert_allclose(a.grad, [0.6, 0.8], rtol=1e-5)

    def test_plateau_and_early_stopping(self):
        optimizer = AdamW([Tensor([0.0], requires_grad=True)], lr=1e-3)
        scheduler = ReduceLROnPlateau(optimizer, factor=0.5, patience=2)
        stopper = EarlyStopping(patience=6)
        reductions, lrs = [], []
        for epoch in range(1, 51):
            lrs.append(optimizer.lr)
            stopper.step(1.0, epoch)
            if scheduler.step(1.0):
                reductions.append(epoch)
            if stopper.should_stop:
                break
        assert reductions[:2] == [3, 5]
        assert epoch == 7
        assert lrs == [1e-3] * 3 + [5e-4] * 2 + [2.5e-4] * 2
        assert stopper.best_epoch == 1

    def test_min_lr_floor(self):
        optimizer = AdamW([Tensor([0.0], requires_grad=True)], lr=2e-5)
        scheduler = ReduceLROnPlateau(optimizer, factor=0.5, patience=1, min_lr=1e-5)
        scheduler.step(1.0)
        for _ in range(4):
            scheduler.step(1.0)
        assert optimizer.lr == pytest.approx(1e-5)

    def test_threshold(self):
        stopper = EarlyStopping(patience=2, threshold=0.01)
        assert stopper.step(1.0, 1)
        assert not stopper.step(0.995, 2)
        assert stopper.step(0.98, 3)


class TestTrainer:
    def test_deterministic(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "cnn1d"})
        data = separable_data(config)
        val = separable_data(config, n=8, seed=1)
        runs = []
        for _ in range(2):
            result = Trainer(TrainConfig(max_epochs=3, batch_size=5, seed=4)).fit(
                create_model(config), data, val)
            runs.append(result)
        pd.testing.assert_frame_equal(runs[0].history.to_frame(), runs[1].history.to_frame())
        first, second = runs[0].model.state_dict(), runs[1].model.state_dict()
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])
        assert (runs[0].history.to_frame()["seconds"] == 0).all()

    def test_max_steps(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "tcn"})
        result = Trainer(TrainConfig(max_steps=2, batch_size=4)).fit(
            create_model(config), separable_data(config), separable_data(config, n=6, seed=2))
        assert result.history.steps == 2
        assert result.history.stop_reason == "max_steps"
        assert len(result.history.records) == 1

    def test_empty_validation_uses_training_loss(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "lstm"})
        empty = TrainingData(np.zeros((0, 8, 5)), np.zeros((0, 8)), np.zeros(0, dtype=int))
        result = Trainer(TrainConfig(max_epochs=2, batch_size=8)).fit(
            create_model(config), separable_data(config), empty)
        for record in result.history.records:
            assert record.val_loss == record.train_loss

    def test_validation_loss_matches_numpy(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "cnn1d"})
        model = create_model(config)
        val = separable_data(config, n=9, seed=3)
        weights = np.array([0.7, 1.8])
        trainer = Trainer(TrainConfig())
        expected = weighted_cross_entropy_np(model.logits(val.x, val.mask), val.labels, weights)
        assert trainer.evaluate_loss(model, val, weights) == pytest.approx(expected)

    def test_divergence(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "cnn1d"})
        data = separable_data(config)
        data.x[0, 0, 0] = np.nan
        with pytest.raises(TrainingDivergedError) as info:
            Trainer(TrainConfig(max_epochs=1, batch_size=len(data))).fit(
                create_model(config), data, data)
        assert info.value.exit_code == 4
        assert info.value.batch_index == 0

    def test_single_class_training_set(self, small_model_config):
        config = small_model_config.model_copy(update={"arch": "cnn1d"})
        data = separable_data(config)
        data.labels[:] = 0
        with pytest.raises(SplitError):
            Trainer(TrainConfig(max_epochs=1)).fit(create_model(config), data, data)

    def test_history_csv(self, tmp_path, small_model_config):
        config = small_model_config.model_copy(update={"arch": "cnn1d"})
        result = Trainer(TrainConfig(max_epochs=2, batch_size=12)).fit(
            create_model(config), separable_data(config), separable_data(config, n=6, seed=5))
        frame = pd.read_csv(write_history_csv(result.history, tmp_path / "history.csv"))
        assert frame.columns.tolist() == ["epoch", "train_loss", "val_loss", "lr", "seconds"]
        assert frame["epoch"].tolist() == [1, 2]

    @pytest.mark.slow
    @pytest.mark.parametrize("arch", ["transformer", "lstm", "cnn1d", "tcn"])
    def test_memorizes_32_days_within_200_steps(self, small_model_config, arch):
        config = small_model_config.model_copy(update={"arch": arch})
        data = separable_data(config, n=32, shift=3.0)
        trainer = Trainer(TrainConfig(lr=1e-2, weight_decay=0.0, max_epochs=50, max_steps=200,
                                      batch_size=8, early_stop_patience=50))
        result = trainer.fit(create_model(config), data, data)
        assert result.history.steps <= 200
        assert result.history.to_frame()["train_loss"].iloc[-1] < 0.05
        assert trainer.evaluate_loss(result.model, data) < 0.05
        predictions = result.model.predict_proba(data.x, data.mask).argmax(axis=1)
        assert (predictions == data.labels).all()
