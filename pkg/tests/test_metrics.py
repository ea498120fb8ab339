import numpy as np
import pytest
from sklearn.metrics import balanced_accuracy_score, f1_score, roc_auc_score

from wildtraj.evaluation import (
    balanced_accuracy,
    balanced_accuracy_detail,
    confusion_matrix,
    f1_positive,
    roc_auc,
    roc_auc_pairs,
)


class TestConfusion:
    def test_orientation(self):
        cm = confusion_matrix([0, 0, 1, 1, 1], [0, 1, 1, 1, 0])
        assert cm.tolist() == [[1, 1], [1, 2]]

    def test_empty(self):
        assert confusion_matrix([], []).tolist() == [[0, 0], [0, 0]]

    def test_absent_class_keeps_shape(self):
        assert confusion_matrix([1, 1], [1, 1], num_classes=3).shape == (3, 3)


class TestBalancedAccuracy:
    def test_example(self):
        assert balanced_accuracy(np.array([[8, 2], [3, 7]])) == pytest.approx(0.75)

    def test_zero_support_excluded(self):
        detail = balanced_accuracy_detail(np.array([[0, 0], [2, 6]]))
        assert detail.value == pytest.approx(0.75)
        assert detail.excluded_classes == [0]

    def test_no_classes(self):
        assert np.isnan(balanced_accuracy(np.zeros((2, 2))))

    def test_against_sklearn(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            labels = rng.integers(0, 2, 50)
            labels[:2] = [0, 1]
            predictions = rng.integers(0, 2, 50)
            ours = balanced_accuracy(confusion_matrix(labels, predictions))
            assert ours == pytest.approx(balanced_accuracy_score(labels, predictions))


class TestF1:
    def test_example(self):
        # TP=7, FP=2, FN=3
        assert f1_positive(np.array([[10, 2], [3, 7]])) == pytest.approx(0.7368, abs=1e-4)

    def test_no_true_positives(self):
        assert f1_positive(np.array([[5, 0], [4, 0]])) == 0.0

    def test_against_sklearn(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            labels = rng.integers(0, 2, 40)
            predictions = rng.integers(0, 2, 40)
            ours = f1_positive(confusion_matrix(labels, predictions))
            assert ours == pytest.approx(f1_score(labels, predictions, zero_division=0))


class TestAUC:
    def test_example(self):
        assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75

    def test_all_tied(self):
        assert roc_auc([0.5] * 4, [0, 1, 0, 1]) == 0.5

    def test_single_class(self):
        assert roc_auc([0.1, 0.2], [1, 1]) is None
        assert roc_auc_pairs([0.1, 0.2], [0, 0]) is None

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            roc_auc([0.1, 0.2], [0, 1, 1])

    def test_ties_match_pairwise_exactly(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            n = int(rng.integers(2, 60))
            scores = rng.integers(0, 6, n) / 5.0
            labels = rng.integers(0, 2, n)
            labels[:2] = [0, 1]
            assert roc_auc(scores, labels) == roc_auc_pairs(scores, labels)

    def test_against_sklearn(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            scores = rng.random(80)
            labels = rng.integers(0, 2, 80)
            assert roc_auc(scores, labels) == pytest.approx(roc_auc_score(labels, scores))
