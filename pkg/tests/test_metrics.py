import numpy as np
import pytest
from hypothesis import given, strategies as st

from uglad import metrics
from uglad.errors import DegenerateLabels, DimensionMismatch


def auc_oracle(labels, scores):
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    total = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def aupr_oracle(labels, scores):
    n_pos = sum(labels)
    area, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        picked = [y for s, y in zip(scores, labels) if s >= t]
        recall = sum(picked) / n_pos
        area += (recall - prev_recall) * sum(picked) / len(picked)
        prev_recall = recall
    return area


def _instance(rng, d):
    while True:
        adj = np.triu(rng.random((d, d)) < rng.uniform(0.1, 0.9), 1)
        adj = adj | adj.T
        labels = adj[np.triu_indices(d, 1)]
        if 0 < labels.sum() < len(labels):
            break
    pred = rng.standard_normal((d, d))
    if rng.random() < 0.5:  # coarse scores force ties
        pred = np.round(pred, 1)
    return pred, adj


def test_perfect_and_tied_scores():
    adj = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=bool)
    pred = np.array([[1.0, 0.9, 0.1], [0.9, 1.0, 0.0], [0.1, 0.0, 1.0]])
    r = metrics.aupr_auc(pred, adj)
    assert r.auc == 1.0 and r.aupr == 1.0
    assert (r.n_positive, r.n_negative) == (1, 2)
    r = metrics.aupr_auc(np.zeros((3, 3)), adj)
    assert r.auc == 0.5
    assert r.aupr == pytest.approx(1.0 / 3.0)


def test_six_edge_instance_matches_oracle():
    adj = np.zeros((4, 4), dtype=bool)
    adj[0, 1] = adj[1, 0] = adj[2, 3] = adj[3, 2] = True
    pred = np.array([[0, 0.5, 0.2, 0.5], [0.5, 0, 0.1, 0.3], [0.2, 0.1, 0, 0.3], [0.5, 0.3, 0.3, 0]])
    labels = adj[np.triu_indices(4, 1)]
    scores = np.abs(pred[np.triu_indices(4, 1)])
    r = metrics.aupr_auc(pred, adj)
    assert r.auc == auc_oracle(labels, scores)
    assert r.aupr == pytest.approx(aupr_oracle(labels, scores), abs=1e-15)


def test_exhaustive_oracle_500_trials():
    rng = np.random.default_rng(5)
    for _ in range(500):
        d = int(rng.integers(3, 11))
        pred, adj = _instance(rng, d)
        iu = np.triu_indices(d, 1)
        labels, scores = list(adj[iu]), list(np.abs(pred[iu]))
        r = metrics.aupr_auc(pred, adj)
        assert r.auc == pytest.approx(auc_oracle(labels, scores), abs=1e-12)
        assert r.aupr == pytest.approx(aupr_oracle(labels, scores), abs=1e-12)
        assert r.n_positive + r.n_negative == d * (d - 1) // 2


def test_errors():
    with pytest.raises(DimensionMismatch):
        metrics.aupr_auc(np.zeros((3, 3)), np.zeros((4, 4), dtype=bool))
    with pytest.raises(DegenerateLabels):
        metrics.aupr_auc(np.ones((3, 3)), np.zeros((3, 3), dtype=bool))
    with pytest.raises(DegenerateLabels):
        metrics.aupr_auc(np.ones((3, 3)), ~np.eye(3, dtype=bool))


@given(st.integers(0, 2**32 - 1))
def test_metrics_are_bounded_and_sign_blind(seed):
    rng = np.random.default_rng(seed)
    pred, adj = _instance(rng, int(rng.integers(3, 9)))
    r = metrics.aupr_auc(pred, adj)
    assert 0.0 <= r.auc <= 1.0 and 0.0 < r.aupr <= 1.0
    assert metrics.aupr_auc(-pred, adj) == r
