"""Predictive-performance metrics and the paired McNemar significance test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, rankdata


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class PredictiveReport:
    accuracy: float
    precision: float
    recall: float
    fp_rate: float
    roc_auc: float
    runtime_seconds: float


@dataclass(frozen=True)
class McNemarResult:
    b: int  # first model correct, second wrong
    c: int  # first model wrong, second correct
    statistic: float
    p_value: float


def _as_binary(vec, name: str) -> np.ndarray:
    arr = np.asarray(vec)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.int64)


def confusion(preds, labels) -> ConfusionCounts:
    """Standard confusion counts with 1 as the positive class."""
    p = _as_binary(preds, "preds")
    y = _as_binary(labels, "labels")
    if p.size != y.size:
        raise ValueError("preds and labels must have equal length")
    if p.size == 0:
        raise ValueError("empty input")
    return ConfusionCounts(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        tn=int(np.sum((p == 0) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
    )


def roc_auc(scores, labels) -> float:
    """Mann-Whitney rank AUC; tied scores contribute one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = _as_binary(labels, "labels")
    if s.size != y.size:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs both classes present")
    ranks = rankdata(s, method="average")
    return float((ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def predictive_report(counts: ConfusionCounts, scores, labels,
                      runtime_seconds: float = 0.0) -> PredictiveReport:
    """Assemble the standard report row from counts and rank statistics.

    Precision with zero predicted positives is 1.0 when nothing was missed
    (fn == 0), else 0.0; recall is vacuously 1.0 with no actual positives and
    fp_rate 0.0 with no actual negatives.
    """
    n = counts.total
    accuracy = (counts.tp + counts.tn) / n
    if counts.tp + counts.fp > 0:
        precision = counts.tp / (counts.tp + counts.fp)
    else:
        precision = 1.0 if counts.fn == 0 else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn > 0 else 1.0
    fp_rate = counts.fp / (counts.fp + counts.tn) if counts.fp + counts.tn > 0 else 0.0
    return PredictiveReport(
        accuracy=float(accuracy),
        precision=float(precision),
        recall=float(recall),
        fp_rate=float(fp_rate),
        roc_auc=roc_auc(scores, labels),
        runtime_seconds=round(float(runtime_seconds), 2),
    )


def mcnemar(preds_a, preds_b, labels) -> McNemarResult:
    """Continuity-corrected McNemar test on the two models' discordant pairs."""
    a = _as_binary(preds_a, "preds_a")
    b_vec = _as_binary(preds_b, "preds_b")
    y = _as_binary(labels, "labels")
    if not (a.size == b_vec.size == y.size):
        raise ValueError("prediction and label vectors must have equal length")
    a_ok = a == y
    b_ok = b_vec == y
    b = int(np.sum(a_ok & ~b_ok))
    c = int(np.sum(~a_ok & b_ok))
    if b + c == 0:
        return McNemarResult(b=b, c=c, statistic=0.0, p_value=1.0)
    statistic = (abs(b - c) - 1) ** 2 / (b + c)
    p_value = float(chi2.sf(statistic, df=1))
    return McNemarResult(b=b, c=c, statistic=float(statistic), p_value=p_value)
