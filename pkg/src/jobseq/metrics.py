"""Binary classification metrics with macro averaging over the two classes.

Per class, precision/recall/F1 use the convention 0/0 = 0; macro values are
the unweighted means over both classes, which makes the all-majority
predictor score macro recall 0.5 on any imbalanced set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class ClassCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    counts: dict  # class label -> ClassCounts

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "counts": {
                str(c): {"tp": k.tp, "fp": k.fp, "fn": k.fn, "tn": k.tn}
                for c, k in self.counts.items()
            },
        }


def compute_metrics(predictions, labels) -> MetricsReport:
    predictions = np.asarray(predictions, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValidationError("predictions and labels must be equal-length vectors")
    if predictions.size == 0:
        raise ValidationError("empty input")
    counts = {}
    for c in (0, 1):
        counts[c] = ClassCounts(
            tp=int(np.sum((predictions == c) & (labels == c))),
            fp=int(np.sum((predictions == c) & (labels != c))),
            fn=int(np.sum((predictions != c) & (labels == c))),
            tn=int(np.sum((predictions != c) & (labels != c))),
        )
    accuracy = float(np.mean(predictions == labels))
    return MetricsReport(
        accuracy=accuracy,
        macro_precision=float(np.mean([counts[c].precision for c in (0, 1)])),
        macro_recall=float(np.mean([counts[c].recall for c in (0, 1)])),
        macro_f1=float(np.mean([counts[c].f1 for c in (0, 1)])),
        counts=counts,
    )


__all__ = ["ClassCounts", "MetricsReport", "compute_metrics"]
