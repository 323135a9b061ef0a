"""Classification and regression metrics with explicit positive-class handling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata


def _split_classes(scores, labels, positive_class):
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D arrays of equal length")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    return s, y == positive_class


def auroc(scores, labels, positive_class=1) -> float:
    """Probability that a random positive outscores a random negative (ties count half)."""
    s, pos = _split_classes(scores, labels, positive_class)
    n_pos = int(pos.sum())
    n_neg = len(s) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC is undefined with a single class")
    ranks = rankdata(s)  # average ranks: tied pairs contribute 1/2
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels, positive_class=1) -> float:
    """Average precision, sum over distinct thresholds of (R_i - R_{i-1}) * P_i.

    Equal scores form one threshold group, so the result does not depend on
    the order of tied samples.
    """
    s, pos = _split_classes(scores, labels, positive_class)
    n_pos = int(pos.sum())
    if n_pos == 0:
        raise ValueError("AUPRC needs at least one positive")
    order = np.argsort(-s, kind="stable")
    s, pos = s[order], pos[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(pos)[last_of_group]
    n_pred = (np.arange(1, len(s) + 1))[last_of_group]
    precision = tp / n_pred
    recall = tp / n_pos
    prev = np.r_[0.0, recall[:-1]]
    return math.fsum(((recall - prev) * precision).tolist())


def accuracy(pred_labels, labels) -> float:
    p = np.asarray(pred_labels)
    y = np.asarray(labels)
    return float(np.mean(p == y))


def _check_pair(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ValueError("need two equal-length vectors with n >= 2")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise ValueError("correlation undefined for a constant vector")
    return x, y


def pearson(x, y) -> float:
    x, y = _check_pair(x, y)
    xc, yc = x - x.mean(), y - y.mean()
    r = float(np.dot(xc, yc) / math.sqrt(np.dot(xc, xc) * np.dot(yc, yc)))
    return max(-1.0, min(1.0, r))


def spearman(x, y) -> float:
    x, y = _check_pair(x, y)
    return pearson(rankdata(x), rankdata(y))


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, pred, labels, positive_class=1) -> "Confusion":
        p = np.asarray(pred) == positive_class
        y = np.asarray(labels) == positive_class
        return cls(
            tp=int(np.sum(p & y)),
            fp=int(np.sum(p & ~y)),
            fn=int(np.sum(~p & y)),
            tn=int(np.sum(~p & ~y)),
        )


def confusion_metrics(c: Confusion) -> dict[str, Optional[float]]:
    """Accuracy, precision and recall; an undefined metric (zero denominator) is ``None``."""

    def ratio(num, den):
        return num / den if den > 0 else None

    return {
        "accuracy": ratio(c.tp + c.tn, c.total),
        "precision": ratio(c.tp, c.tp + c.fp),
        "recall": ratio(c.tp, c.tp + c.fn),
    }


def screening_efficiency(c: Confusion, baseline_prevalence: float) -> dict[str, float]:
    """Screen-then-confirm yield: the pass fraction among advanced candidates.

    ``efficiency`` equals the precision of the pass predictions; the gains
    compare it with advancing everything (``baseline_prevalence``).
    """
    if not 0.0 < baseline_prevalence <= 1.0:
        raise ValueError("baseline prevalence must lie in (0, 1]")
    if c.tp + c.fp == 0:
        raise ValueError("no candidates advanced (tp + fp = 0)")
    eff = c.tp / (c.tp + c.fp)
    return {
        "efficiency": eff,
        "abs_gain": eff - baseline_prevalence,
        "mult_gain": eff / baseline_prevalence,
    }
