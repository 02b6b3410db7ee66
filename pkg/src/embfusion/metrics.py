"""Classification metrics: confusion matrix, accuracy, macro-F1.

Precision, recall, and F1 are defined as 0 whenever their denominator is 0
(the convention that makes degenerate baselines score what the published
tables show).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyEvalError, ShapeError


@dataclass
class ConfusionMatrix:
    """counts[t][p] = number of samples with true class t predicted as p."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {counts.shape}")
        if (counts < 0).any():
            raise ShapeError("confusion counts must be non-negative")
        self.counts = counts

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(pred, truth, n_classes: int) -> ConfusionMatrix:
    pred = np.asarray(pred, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError(f"pred {pred.shape} and truth {truth.shape} must be equal-length 1-D")
    if pred.size and (
        pred.min() < 0 or truth.min() < 0 or pred.max() >= n_classes or truth.max() >= n_classes
    ):
        raise ShapeError(f"labels out of range for {n_classes} classes")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts)


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyEvalError("accuracy over zero samples")
    return float(np.trace(cm.counts)) / cm.total


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """F1 per class; 0 where precision, recall, or their sum is undefined."""
    tp = np.diag(cm.counts).astype(np.float64)
    pred_totals = cm.counts.sum(axis=0).astype(np.float64)
    true_totals = cm.counts.sum(axis=1).astype(np.float64)
    precision = np.divide(tp, pred_totals, out=np.zeros_like(tp), where=pred_totals > 0)
    recall = np.divide(tp, true_totals, out=np.zeros_like(tp), where=true_totals > 0)
    pr = precision + recall
    return np.divide(2 * precision * recall, pr, out=np.zeros_like(tp), where=pr > 0)


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1; absent classes still divide by n_classes."""
    if cm.total == 0:
        raise EmptyEvalError("macro-F1 over zero samples")
    return float(per_class_f1(cm).mean())
