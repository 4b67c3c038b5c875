"""Binary classification metrics derived from a 2x2 confusion matrix.

The positive class is "tumorous". Metrics whose denominator is zero are
reported as NaN (undefined), never silently as 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(
            self.tp + other.tp, self.tn + other.tn, self.fp + other.fp, self.fn + other.fn
        )

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


def confusion_from_predictions(
    y_true: np.ndarray, y_prob: np.ndarray, threshold: float = 0.5
) -> ConfusionMatrix:
    """Count the four cells at a fixed probability threshold (p >= t is positive)."""
    y_true = np.asarray(y_true).astype(np.int64)
    pred = (np.asarray(y_prob) >= threshold).astype(np.int64)
    tp = int(np.sum((y_true == 1) & (pred == 1)))
    tn = int(np.sum((y_true == 0) & (pred == 0)))
    fp = int(np.sum((y_true == 0) & (pred == 1)))
    fn = int(np.sum((y_true == 1) & (pred == 0)))
    return ConfusionMatrix(tp, tn, fp, fn)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else math.nan


def metrics_from_confusion(cm: ConfusionMatrix) -> dict:
    """Accuracy, specificity, recall, precision and F1 from the four counts."""
    accuracy = _ratio(cm.tp + cm.tn, cm.total)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    specificity = _ratio(cm.tn, cm.tn + cm.fp)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    if math.isnan(precision) or math.isnan(recall) or precision + recall == 0:
        f1 = math.nan
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return {
        "accuracy": accuracy,
        "specificity": specificity,
        "recall": recall,
        "precision": precision,
        "f1": f1,
    }


def format_metric(value: float) -> str:
    return "undefined" if math.isnan(value) else f"{value:.6f}"


def confusion_table(cm: ConfusionMatrix) -> str:
    """Plain-text 2x2 table; rows are the true class, columns the prediction."""
    rows = [
        ("", "pred_normal", "pred_tumor"),
        ("true_normal", str(cm.tn), str(cm.fp)),
        ("true_tumor", str(cm.fn), str(cm.tp)),
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    return "\n".join("  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows)
