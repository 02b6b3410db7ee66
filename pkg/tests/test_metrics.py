import numpy as np
import pytest

from embfusion.errors import EmptyEvalError, ShapeError
from embfusion.metrics import ConfusionMatrix, accuracy, confusion, macro_f1, per_class_f1


# ---------------------------------------------------------------------------
# Per-sample counting oracles

def oracle_confusion(pred, truth, n_classes):
    counts = [[0] * n_classes for _ in range(n_classes)]
    for p, t in zip(pred, truth):
        counts[t][p] += 1
    return counts


def oracle_accuracy(pred, truth):
    return sum(int(p == t) for p, t in zip(pred, truth)) / len(pred)


def oracle_macro_f1(pred, truth, n_classes):
    scores = []
    for c in range(n_classes):
        tp = sum(1 for p, t in zip(pred, truth) if p == c and t == c)
        fp = sum(1 for p, t in zip(pred, truth) if p == c and t != c)
        fn = sum(1 for p, t in zip(pred, truth) if p != c and t == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / n_classes


# ---------------------------------------------------------------------------
# Confusion matrix

def test_perfect_predictions_diagonal():
    cm = confusion([0, 1, 2, 1], [0, 1, 2, 1], 3)
    assert np.trace(cm.counts) == 4
    assert cm.counts.sum() == 4


def test_swapped_binary_antidiagonal():
    cm = confusion([1, 0], [0, 1], 2)
    np.testing.assert_array_equal(cm.counts, [[0, 1], [1, 0]])


def test_confusion_matches_counting_oracle():
    rng = np.random.default_rng(41)
    truth = rng.integers(0, 4, size=500)
    pred = rng.integers(0, 4, size=500)
    cm = confusion(pred, truth, 4)
    np.testing.assert_array_equal(cm.counts, oracle_confusion(pred, truth, 4))


def test_length_mismatch_rejected():
    with pytest.raises(ShapeError):
        confusion([0, 1], [0], 2)


def test_out_of_range_labels_rejected():
    with pytest.raises(ShapeError):
        confusion([0, 2], [0, 1], 2)


# ---------------------------------------------------------------------------
# Accuracy

def test_accuracy_values():
    assert accuracy(ConfusionMatrix(np.diag([3, 5]))) == 1.0
    assert accuracy(ConfusionMatrix(np.ones((2, 2)))) == 0.5
    assert accuracy(ConfusionMatrix(np.array([[3, 1], [2, 4]]))) == 7 / 10


def test_accuracy_empty_rejected():
    with pytest.raises(EmptyEvalError):
        accuracy(ConfusionMatrix(np.zeros((2, 2))))


# ---------------------------------------------------------------------------
# Macro F1

def test_macro_f1_perfect():
    assert macro_f1(ConfusionMatrix(np.diag([7, 2, 11]))) == 1.0


def test_macro_f1_hand_example():
    # truth [0,0,1,1], pred [0,1,1,1]: class0 F1=2/3, class1 F1=0.8
    cm = confusion([0, 1, 1, 1], [0, 0, 1, 1], 2)
    assert macro_f1(cm) == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-12)
    assert macro_f1(cm) == pytest.approx(0.7333, abs=1e-4)


def test_absent_class_scores_zero_but_divides():
    # class 2 never appears in truth or predictions
    cm = confusion([0, 1], [0, 1], 3)
    np.testing.assert_array_equal(per_class_f1(cm), [1.0, 1.0, 0.0])
    assert macro_f1(cm) == pytest.approx(2 / 3)


def test_metrics_match_oracles_randomized():
    rng = np.random.default_rng(42)
    for _ in range(200):
        n_classes = int(rng.integers(2, 5))
        n = int(rng.integers(1, 60))
        truth = rng.integers(0, n_classes, size=n)
        pred = rng.integers(0, n_classes, size=n)
        cm = confusion(pred, truth, n_classes)
        assert accuracy(cm) == pytest.approx(oracle_accuracy(pred, truth), abs=1e-12)
        assert macro_f1(cm) == pytest.approx(
            oracle_macro_f1(pred, truth, n_classes), abs=1e-12
        )


def test_relabeling_invariance():
    rng = np.random.default_rng(43)
    truth = rng.integers(0, 3, size=120)
    pred = rng.integers(0, 3, size=120)
    perm = np.array([2, 0, 1])
    cm1 = confusion(pred, truth, 3)
    cm2 = confusion(perm[pred], perm[truth], 3)
    assert accuracy(cm1) == pytest.approx(accuracy(cm2), abs=1e-12)
    assert macro_f1(cm1) == pytest.approx(macro_f1(cm2), abs=1e-12)


def test_macro_f1_equals_accuracy_on_symmetric_binary():
    cm = ConfusionMatrix(np.array([[40, 10], [10, 40]]))
    assert macro_f1(cm) == pytest.approx(accuracy(cm), abs=1e-12)


def test_bounds():
    rng = np.random.default_rng(44)
    for _ in range(50):
        truth = rng.integers(0, 3, size=30)
        pred = rng.integers(0, 3, size=30)
        cm = confusion(pred, truth, 3)
        assert 0.0 <= accuracy(cm) <= 1.0
        assert 0.0 <= macro_f1(cm) <= 1.0
