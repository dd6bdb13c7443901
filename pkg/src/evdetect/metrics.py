"""Confusion counts and the precision/recall/F1/accuracy report.

Zero-denominator policy: with no predicted positives precision is
undefined, with no actual positives recall is undefined, and F1 is
undefined whenever either of its inputs is. Undefined metrics are
reported as None rather than silently coerced to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import ChargingLabelSeries


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsReport:
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    counts: ConfusionCounts


def _labels_of(labels) -> np.ndarray:
    if isinstance(labels, ChargingLabelSeries):
        return labels.labels
    arr = np.asarray(labels)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("labels must all be 0 or 1")
    return arr.astype(np.uint8)


def confusion(y_true, y_pred) -> ConfusionCounts:
    """Tally the 2x2 table of two aligned binary label sequences."""
    t = _labels_of(y_true)
    p = _labels_of(y_pred)
    if t.shape[0] != p.shape[0]:
        raise LengthMismatchError(
            f"true labels have length {t.shape[0]}, predicted {p.shape[0]}"
        )
    cells = np.bincount(2 * t.astype(np.int64) + p, minlength=4)
    return ConfusionCounts(tp=int(cells[3]), fp=int(cells[1]),
                           fn=int(cells[2]), tn=int(cells[0]))


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (2PR/(P+R))."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics(counts: ConfusionCounts) -> MetricsReport:
    """Precision, recall, F1 and accuracy from a confusion tally."""
    tp, fp, fn, tn = counts.tp, counts.fp, counts.fn, counts.tn
    total = counts.total
    precision = tp / (tp + fp) if tp + fp > 0 else None
    recall = tp / (tp + fn) if tp + fn > 0 else None
    if precision is None or recall is None:
        f1 = None
    else:
        f1 = f1_score(precision, recall)
    accuracy = (tp + tn) / total if total > 0 else None
    return MetricsReport(precision=precision, recall=recall, f1=f1,
                         accuracy=accuracy, counts=counts)
