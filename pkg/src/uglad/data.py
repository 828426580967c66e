"""Synthetic Gaussian graphs, sampling, dropout injection, covariance and imputation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import EmptyColumn, InvalidArgument, MissingData, ShapeMismatch, TooFewRows


def default_features(d: int) -> list[str]:
    return [f"x{i}" for i in range(d)]


@dataclass
class Dataset:
    """Sample matrix (M x D).  Missing entries are NaN in ``values`` and True in ``mask``."""

    values: np.ndarray
    mask: np.ndarray | None = None
    features: list | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeMismatch("dataset must be a 2-D matrix")
        if self.features is None:
            self.features = default_features(self.values.shape[1])
        if len(self.features) != self.values.shape[1]:
            raise ShapeMismatch("feature names do not match the number of columns")
        if self.mask is None:
            self.mask = np.isnan(self.values)
        else:
            self.mask = np.asarray(self.mask, dtype=bool)
            self.values = np.where(self.mask, np.nan, self.values)
        if not np.all(np.isfinite(self.values[~self.mask])):
            raise InvalidArgument("observed entries must be finite")

    @property
    def shape(self):
        return self.values.shape

    @property
    def has_missing(self) -> bool:
        return bool(self.mask.any())

    def rows(self, idx) -> "Dataset":
        return Dataset(self.values[idx], self.mask[idx], list(self.features))

    def permute_features(self, perm) -> "Dataset":
        perm = np.asarray(perm)
        return Dataset(self.values[:, perm], self.mask[:, perm], [self.features[i] for i in perm])


@dataclass
class GroundTruth:
    precision: np.ndarray
    adjacency: np.ndarray

    @classmethod
    def from_precision(cls, precision, tol: float = 0.0) -> "GroundTruth":
        precision = np.asarray(precision, dtype=np.float64)
        adj = np.abs(precision) > tol
        np.fill_diagonal(adj, False)
        return cls(precision, adj)


def generate_precision(d: int, p: float, seed) -> GroundTruth:
    """Sparse SPD precision matrix with smallest eigenvalue exactly 1.

    Off-diagonal weights are U(-1, 1), kept with probability ``p`` (Erdos-Renyi
    support), then the diagonal is shifted by ``1 - lambda_min``.
    """
    if d < 2:
        raise InvalidArgument("need at least two features")
    if not 0.0 <= p <= 1.0:
        raise InvalidArgument("edge probability must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    iu = np.triu_indices(d, 1)
    weights = rng.uniform(-1.0, 1.0, size=len(iu[0]))
    keep = rng.random(len(iu[0])) < p
    a = np.zeros((d, d))
    a[iu] = np.where(keep, weights, 0.0)
    a = a + a.T
    w, _ = linalg.sym_eig(a)
    theta = a + (1.0 - w[0]) * np.eye(d)
    adj = np.zeros((d, d), dtype=bool)
    adj[iu] = keep & (weights != 0.0)
    adj = adj | adj.T
    return GroundTruth(theta, adj)


def sample_mvn(truth: GroundTruth, M: int, seed) -> Dataset:
    """``M`` i.i.d. draws from N(0, precision^-1) as ``G @ L.T``."""
    if M < 1:
        raise InvalidArgument("M must be at least 1")
    sigma = linalg.spd_inverse(truth.precision)
    L = linalg.cholesky(sigma)
    g = np.random.default_rng(seed).standard_normal((M, sigma.shape[0]))
    return Dataset(g @ L.T)


def covariance(X) -> np.ndarray:
    """Biased (1/M) covariance with mean centering, symmetrized."""
    if isinstance(X, Dataset):
        if X.has_missing:
            raise MissingData("covariance needs complete data; impute first")
        values = X.values
    else:
        values = np.asarray(X, dtype=np.float64)
        if np.isnan(values).any():
            raise MissingData("covariance needs complete data; impute first")
    if values.shape[0] < 2:
        raise TooFewRows("covariance needs at least two samples")
    centered = values - values.mean(axis=0)
    return linalg.symmetrize(centered.T @ centered / values.shape[0])


def mean_impute(X: Dataset) -> Dataset:
    """Replace each missing entry by the mean of the observed entries of its column."""
    observed = ~X.mask
    counts = observed.sum(axis=0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        name = X.features[empty[0]]
        raise EmptyColumn(f"feature {name!r} has no observed values", feature=name)
    sums = np.where(observed, X.values, 0.0).sum(axis=0)
    means = sums / counts
    filled = np.where(X.mask, means[None, :], X.values)
    return Dataset(filled, np.zeros_like(X.mask), list(X.features))


def inject_dropout(X: Dataset, fraction: float, seed) -> Dataset:
    """Mark exactly ``round(fraction * M * D)`` uniformly chosen entries as missing."""
    if not 0.0 <= fraction < 1.0:
        raise InvalidArgument("dropout fraction must lie in [0, 1)")
    m, d = X.shape
    count = int(round(fraction * m * d))
    mask = X.mask.copy()
    if count:
        chosen = np.random.default_rng(seed).choice(m * d, size=count, replace=False)
        mask.flat[chosen] = True
    return Dataset(X.values, mask, list(X.features))
