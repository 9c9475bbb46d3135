"""Binary-classification metrics and ROC analysis.

Every rate with a zero denominator raises UndefinedMetricError; nothing here
silently returns 0 or NaN. The positive class is label 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise DataError(f"{name} must be a non-negative int, got {v!r}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def _binary_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise DataError(f"{name} must contain only 0 and 1")
    return arr.astype(np.uint8)


def confusion(labels, predictions) -> ConfusionMatrix:
    """Exact counts; labels and predictions are equal-length 0/1 vectors."""
    y = _binary_array(labels, "labels")
    p = _binary_array(predictions, "predictions")
    if y.shape != p.shape:
        raise DataError(f"length mismatch: {y.shape[0]} labels, {p.shape[0]} predictions")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        fp=int(np.sum((y == 0) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        raise UndefinedMetricError(f"{what} is undefined: denominator is zero")
    return num / den


def accuracy(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp + cm.tn, cm.total, "accuracy")


def recall(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fn, "recall")


def specificity(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tn, cm.tn + cm.fp, "specificity")


def precision(cm: ConfusionMatrix) -> float:
    return _ratio(cm.tp, cm.tp + cm.fp, "precision")


def f_beta(precision_value: float, recall_value: float, beta: float) -> float:
    """(1 + b^2) * P * R / (b^2 * P + R); undefined when both rates are 0."""
    if not (np.isfinite(beta) and beta > 0):
        raise DataError(f"beta must be finite and > 0, got {beta}")
    for name, v in (("precision", precision_value), ("recall", recall_value)):
        if not (0.0 <= v <= 1.0):
            raise DataError(f"{name} must be within [0, 1], got {v}")
    den = beta * beta * precision_value + recall_value
    if den == 0.0:
        raise UndefinedMetricError("f_beta is undefined: precision and recall are both 0")
    return (1.0 + beta * beta) * precision_value * recall_value / den


def g_mean(recall_value: float, specificity_value: float) -> float:
    """Geometric mean of recall and specificity."""
    for name, v in (("recall", recall_value), ("specificity", specificity_value)):
        if not (0.0 <= v <= 1.0):
            raise DataError(f"{name} must be within [0, 1], got {v}")
    return math.sqrt(recall_value * specificity_value)


def _checked_scores(scores, labels) -> tuple[np.ndarray, np.ndarray, int, int]:
    y = _binary_array(labels, "labels")
    s = np.asarray(scores, dtype=np.float64)
    if s.shape != y.shape:
        raise DataError(f"length mismatch: {s.shape[0]} scores, {y.shape[0]} labels")
    if not np.all(np.isfinite(s)):
        raise DataError("scores must be finite")
    n_pos = int(np.sum(y))
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC is undefined: needs both classes present")
    return s, y, n_pos, n_neg


def roc_points(scores, labels) -> list[tuple[float, float, float]]:
    """(threshold, fpr, tpr) triples for the sweep "predict 1 iff score >=
    threshold", walking thresholds from +inf down through every distinct
    score. Ties collapse into a single step. fpr and tpr are non-decreasing,
    from (0, 0) to (1, 1)."""
    s, y, n_pos, n_neg = _checked_scores(scores, labels)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    points = [(math.inf, 0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = s_sorted.shape[0]
    while i < n:
        j = i
        while j < n and s_sorted[j] == s_sorted[i]:
            j += 1
        block = y_sorted[i:j]
        tp += int(np.sum(block))
        fp += (j - i) - int(np.sum(block))
        points.append((float(s_sorted[i]), fp / n_neg, tp / n_pos))
        i = j
    return points


def roc_auc(scores, labels) -> tuple[float, list[tuple[float, float, float]]]:
    """Trapezoidal area under the ROC sweep; ties earn half credit, matching
    the pairwise comparison statistic exactly."""
    points = roc_points(scores, labels)
    auc = 0.0
    for (_, fpr0, tpr0), (_, fpr1, tpr1) in zip(points, points[1:]):
        auc += (fpr1 - fpr0) * (tpr1 + tpr0) * 0.5
    return auc, points


@dataclass(frozen=True)
class EvalReport:
    """One evaluation: the confusion matrix, the derived rates, AUC, and the
    rule that produced the scores."""

    confusion: ConfusionMatrix
    accuracy: float
    recall: float
    specificity: float
    precision: float
    f1: float
    f2: float
    g_mean: float
    auc: float
    score_rule: str

    CSV_HEADER = "accuracy,recall,specificity,precision,f1,f2,g_mean,auc"

    def csv_row(self) -> str:
        """Percent-formatted row in the header's column order."""
        vals = (
            self.accuracy,
            self.recall,
            self.specificity,
            self.precision,
            self.f1,
            self.f2,
            self.g_mean,
            self.auc,
        )
        return ",".join(f"{100.0 * v:.2f}" for v in vals)


def evaluate(labels, predictions, scores, score_rule: str = "decision-value") -> EvalReport:
    """Full report over one prediction set. Undefined metrics propagate."""
    cm = confusion(labels, predictions)
    rec = recall(cm)
    spe = specificity(cm)
    pre = precision(cm)
    auc, _ = roc_auc(scores, labels)
    return EvalReport(
        confusion=cm,
        accuracy=accuracy(cm),
        recall=rec,
        specificity=spe,
        precision=pre,
        f1=f_beta(pre, rec, 1.0),
        f2=f_beta(pre, rec, 2.0),
        g_mean=g_mean(rec, spe),
        auc=auc,
        score_rule=score_rule,
    )
