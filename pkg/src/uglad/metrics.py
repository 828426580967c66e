"""Threshold-free edge-recovery metrics over the strict upper triangle."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateLabels, DimensionMismatch


@dataclass
class MetricReport:
    aupr: float
    auc: float
    n_positive: int
    n_negative: int

    def to_dict(self):
        return asdict(self)


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x))
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and xs[j + 1] == xs[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_score(labels, scores) -> float:
    """Mann-Whitney AUC; tied scores count one half."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    ranks = _average_ranks(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(labels, scores) -> float:
    """Step-wise area under the precision-recall curve, one step per distinct score."""
    labels = np.asarray(labels, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    y = labels[order]
    tp = np.cumsum(y)
    # last index of every run of equal scores
    ends = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tps = tp[ends]
    precision = tps / (ends + 1.0)
    recall = tps / tp[-1]
    prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - prev) * precision))


def aupr_auc(predicted, truth) -> MetricReport:
    """Score ``|predicted_ij|`` (i < j) against the true adjacency."""
    adjacency = getattr(truth, "adjacency", truth)
    predicted = np.asarray(predicted, dtype=np.float64)
    adjacency = np.asarray(adjacency, dtype=bool)
    if predicted.shape != adjacency.shape or predicted.ndim != 2:
        raise DimensionMismatch(f"prediction {predicted.shape} vs truth {adjacency.shape}")
    iu = np.triu_indices(predicted.shape[0], 1)
    scores = np.abs(predicted[iu])
    labels = adjacency[iu]
    n_pos = int(labels.sum())
    n_neg = int(len(labels) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("truth has no positive or no negative edges; metrics undefined")
    return MetricReport(average_precision(labels, scores), auc_score(labels, scores), n_pos, n_neg)
