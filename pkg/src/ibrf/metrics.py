"""Binary classification metrics with the minority class as positive.

Every ratio whose denominator is zero evaluates to 0.0 rather than NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

METRIC_NAMES = ("mcc", "gmean", "roc_auc", "sensitivity", "specificity",
                "precision", "accuracy", "f1")


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError(f"confusion counts must be non-negative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def swapped(self) -> "ConfusionMatrix":
        """The same predictions with positive and negative roles exchanged."""
        return ConfusionMatrix(tp=self.tn, fn=self.fp, fp=self.fn, tn=self.tp)


def _ratio(num, den) -> float:
    return num / den if den else 0.0


def confusion(y_true, y_pred, positive, labels=None) -> ConfusionMatrix:
    """Tally a 2x2 confusion matrix.

    ``labels`` lists the two admissible values; it defaults to the values seen,
    and any value outside it raises ``ValueError``.
    """
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if labels is not None:
        known = set(np.asarray(labels).tolist())
        seen = set(y_true.tolist()) | set(y_pred.tolist())
        unknown = seen - known
        if unknown:
            raise ValueError(f"unknown label values {sorted(map(str, unknown))}")
    t = y_true == positive
    p = y_pred == positive
    return ConfusionMatrix(
        tp=int(np.sum(t & p)), fn=int(np.sum(t & ~p)),
        fp=int(np.sum(~t & p)), tn=int(np.sum(~t & ~p)),
    )


def mcc(cm: ConfusionMatrix) -> float:
    """Matthews correlation coefficient.

    Products are formed on Python integers, so large counts cannot overflow.
    """
    tp, fn, fp, tn = int(cm.tp), int(cm.fn), int(cm.fp), int(cm.tn)
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(den)


def sensitivity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn)


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp)


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp)


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.total)


def f1(cm: ConfusionMatrix) -> float:
    p, r = precision(cm), sensitivity(cm)
    return _ratio(2 * p * r, p + r)


def gmean(cm: ConfusionMatrix) -> float:
    return math.sqrt(sensitivity(cm) * specificity(cm))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    # group boundaries of equal values
    starts = np.flatnonzero(np.r_[True, sorted_vals[1:] != sorted_vals[:-1]])
    ends = np.r_[starts[1:], len(values)]
    # 1-based average rank of each tie block
    avg = (starts + 1 + ends) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def roc_auc(y_true, scores, positive=1) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Tied scores receive mid-ranks, which counts a tied positive/negative pair
    as half a win.
    """
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if y_true.shape != scores.shape:
        raise ValueError("y_true and scores must have the same length")
    pos = y_true == positive
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC is undefined when only one class is present")
    ranks = _midranks(scores)
    # ranks are multiples of 0.5, so twice the sum is an exact integer
    twice_rank_sum = int(round(2.0 * ranks[pos].sum()))
    twice_u = twice_rank_sum - n_pos * (n_pos + 1)
    return twice_u / (2 * n_pos * n_neg)


def all_metrics(cm: ConfusionMatrix, auc: float) -> dict[str, float]:
    return {
        "mcc": mcc(cm),
        "gmean": gmean(cm),
        "roc_auc": auc,
        "sensitivity": sensitivity(cm),
        "specificity": specificity(cm),
        "precision": precision(cm),
        "accuracy": accuracy(cm),
        "f1": f1(cm),
    }
