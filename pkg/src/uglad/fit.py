"""Training loop and the four fitting modes: direct, cv, multitask and missing.

Every mode trains one shared :class:`~uglad.glad.GladParams` with Adam on an
unsupervised likelihood loss; the modes differ only in which covariance
matrices are fed through the network and which ones score its output.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import glad, linalg
from .autodiff import Tape, backward
from .data import Dataset, covariance, mean_impute
from .errors import DegenerateData, DimensionMismatch, InvalidArgument, LengthMismatch, ShapeMismatch, TooFewRows
from .glad import GladParams, UnrollConfig

log = logging.getLogger(__name__)

MODES = ("direct", "cv", "multitask", "missing")
LR_RANGE = (0.001, 0.005)
T_FLOOR = 1e-6

# stream tags for np.random.SeedSequence spawn keys
_CV_SPLIT, _FOLDS, _TASK_SPLIT = 1, 2, 3


@dataclass
class FitConfig:
    mode: str = "direct"
    epochs: int = 250
    lr: float = 0.002
    unroll: UnrollConfig = field(default_factory=UnrollConfig)
    cv_holdout: float = 0.3
    folds: int = 3
    seed: int = 0
    multitask_split: bool = False
    early_stop_window: int = 25
    early_stop_tol: float = 1e-6
    lr_override: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 1:
            raise InvalidArgument("epochs must be at least 1")
        if not self.lr_override and not LR_RANGE[0] <= self.lr <= LR_RANGE[1]:
            raise InvalidArgument(f"learning rate {self.lr} outside {LR_RANGE}; set lr_override to force it")
        if not 0.0 < self.cv_holdout < 1.0:
            raise InvalidArgument("cv holdout fraction must lie in (0, 1)")
        if isinstance(self.unroll, dict):
            self.unroll = UnrollConfig(**self.unroll)

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr: float) -> tuple[dict, AdamState]:
    """Bias-corrected Adam; updates ``params`` in place and returns ``(params, state)``."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        if g.shape != np.shape(p):
            raise ShapeMismatch(f"gradient for {k} has shape {g.shape}, parameter {np.shape(p)}")
        if k not in state.m:
            state.m[k] = np.zeros_like(g)
            state.v[k] = np.zeros_like(g)
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        update = lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + state.eps)
        params[k] = p - update
    return params, state


@dataclass
class FitResult:
    precision: object  # ndarray, or list of ndarrays for multitask
    loss_history: list
    mode: str
    seed: int
    config: dict
    features: list
    best_epoch: int | None = None
    val_history: list | None = None
    params: GladParams | None = None
    folds: int | None = None
    batch_precisions: list | None = None

    @property
    def consensus(self) -> bool:
        return self.mode == "missing"


def _stream(seed, *tags) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tags))


def _check_variance(X: Dataset):
    var = np.var(X.values, axis=0)
    bad = np.flatnonzero(~(var > 0.0))
    if bad.size:
        name = X.features[bad[0]]
        raise DegenerateData(f"feature {name!r} has zero variance", feature=name)


def _complete(X) -> Dataset:
    X = X if isinstance(X, Dataset) else Dataset(X)
    if X.has_missing:
        raise InvalidArgument("data has missing entries; use mode 'missing' or impute first")
    if X.shape[0] < 2:
        raise TooFewRows("need at least two samples")
    _check_variance(X)
    return X


def _train(inputs, loss_fn, cfg: FitConfig, on_epoch=None):
    """Algorithm loop shared by all modes.

    ``inputs`` are the covariances fed through the network, ``loss_fn`` maps
    the list of output precision nodes to a scalar node.  ``on_epoch(e,
    thetas)`` sees plain arrays.  Returns (params, loss_history, last thetas).
    """
    params = GladParams.init(cfg.seed)
    adam = AdamState()
    history = []
    best, best_epoch = np.inf, 0
    thetas = None
    for epoch in range(cfg.epochs):
        tape = Tape()
        leaves = glad.param_leaves(tape, params)
        outs = [glad.glad_forward(S, params, cfg.unroll, tape=tape, nodes=leaves).theta for S in inputs]
        loss = loss_fn(outs)
        grads = backward(loss)
        value = float(loss.value)
        if not np.isfinite(value):
            raise DegenerateData(f"training loss became non-finite at epoch {epoch + 1}")
        history.append(value)
        thetas = [np.array(o.value) for o in outs]
        if on_epoch is not None:
            on_epoch(epoch, thetas)
        new, _ = adam_step(dict(params.arrays), {k: grads[leaves[k]] for k in params.arrays}, adam, cfg.lr)
        new["t"] = np.array(max(float(new["t"]), T_FLOOR))
        params = GladParams(new)
        if value < best - cfg.early_stop_tol:
            best, best_epoch = value, epoch
        elif epoch - best_epoch >= cfg.early_stop_window:
            log.debug("early stop at epoch %d", epoch + 1)
            break
    return params, history, thetas


def fit_direct(X, cfg: FitConfig | None = None) -> FitResult:
    cfg = cfg or FitConfig(mode="direct")
    X = _complete(X)
    S = covariance(X)
    params, history, thetas = _train([S], lambda outs: glad.uglad_loss(S, outs[0]), cfg)
    return FitResult(thetas[0], history, "direct", cfg.seed, cfg.to_dict(), list(X.features), params=params)


def holdout_split(m: int, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    if m < 4:
        raise TooFewRows("cv mode needs at least 4 samples")
    n_valid = min(max(int(round(fraction * m)), 2), m - 2)
    perm = rng.permutation(m)
    return np.sort(perm[n_valid:]), np.sort(perm[:n_valid])


def fit_cv(X, cfg: FitConfig | None = None, split=None) -> FitResult:
    """Train on a row subset, keep the epoch whose output best fits the held-out rows.

    ``split`` overrides the seeded shuffle with explicit ``(train_idx, valid_idx)``.
    """
    cfg = cfg or FitConfig(mode="cv")
    X = _complete(X)
    if split is None:
        train_idx, valid_idx = holdout_split(X.shape[0], cfg.cv_holdout, _stream(cfg.seed, _CV_SPLIT))
    else:
        train_idx, valid_idx = (np.asarray(i) for i in split)
    S_train = covariance(X.values[train_idx])
    S_valid = covariance(X.values[valid_idx])
    val_history = []
    best = {"loss": np.inf, "epoch": None, "theta": None}

    def on_epoch(epoch, thetas):
        v = glad.uglad_loss(S_valid, thetas[0])
        val_history.append(v)
        if v < best["loss"]:
            best.update(loss=v, epoch=epoch, theta=thetas[0])

    params, history, _ = _train([S_train], lambda outs: glad.uglad_loss(S_train, outs[0]), cfg, on_epoch)
    return FitResult(best["theta"], history, "cv", cfg.seed, cfg.to_dict(), list(X.features),
                     best_epoch=best["epoch"] + 1, val_history=val_history, params=params)


def fit_multitask(XK, cfg: FitConfig | None = None) -> FitResult:
    """One shared network trained on the mean loss over ``K`` tasks."""
    cfg = cfg or FitConfig(mode="multitask")
    if not XK:
        raise LengthMismatch("need at least one task")
    XK = [_complete(X) for X in XK]
    d = XK[0].shape[1]
    if any(X.shape[1] != d for X in XK):
        raise DimensionMismatch("all tasks must share the same features")
    if cfg.multitask_split:
        inputs, evals = [], []
        for k, X in enumerate(XK):
            tr, va = holdout_split(X.shape[0], cfg.cv_holdout, _stream(cfg.seed, _TASK_SPLIT, k))
            inputs.append(covariance(X.values[tr]))
            evals.append(covariance(X.values[va]))
    else:
        inputs = [covariance(X) for X in XK]
        evals = inputs
    params, history, thetas = _train(inputs, lambda outs: glad.multitask_loss(evals, outs), cfg)
    return FitResult(thetas, history, "multitask", cfg.seed, cfg.to_dict(), list(XK[0].features), params=params)


def stratified_folds(missing_counts, K: int, seed) -> np.ndarray:
    """Fold index per row; rows with the most missing entries are dealt first, round-robin."""
    counts = np.asarray(missing_counts)
    if K < 2:
        raise InvalidArgument("need at least two folds")
    if len(counts) < K:
        raise TooFewRows(f"{len(counts)} rows cannot fill {K} folds")
    rng = seed if isinstance(seed, np.random.Generator) else _stream(seed, _FOLDS)
    shuffled = rng.permutation(len(counts))
    order = shuffled[np.argsort(-counts[shuffled], kind="stable")]
    folds = np.empty(len(counts), dtype=int)
    folds[order] = np.arange(len(counts)) % K
    return folds


def consensus_combine(thetas, vote_tol: float = 1e-8) -> np.ndarray:
    """Entrywise majority sign times minimum magnitude; sign ties give 0.

    Entries with magnitude at or below ``vote_tol`` do not vote.
    """
    if not thetas:
        raise LengthMismatch("need at least one matrix")
    mats = [np.asarray(t, dtype=np.float64) for t in thetas]
    if mats[0].ndim != 2 or any(m.shape != mats[0].shape for m in mats):
        raise LengthMismatch("matrices must share one shape")
    stack = np.stack(mats)
    votes = np.where(np.abs(stack) > vote_tol, np.sign(stack), 0.0)
    sign = np.sign(votes.sum(axis=0))
    return sign * np.abs(stack).min(axis=0)


def fit_missing(X: Dataset, cfg: FitConfig | None = None) -> FitResult:
    """Consensus strategy: impute, split rows into K batches, train jointly, combine."""
    cfg = cfg or FitConfig(mode="missing")
    if not isinstance(X, Dataset):
        X = Dataset(X)
    K = cfg.folds
    imputed = mean_impute(X)
    _check_variance(imputed)
    S_full = covariance(imputed)
    folds = stratified_folds(X.mask.sum(axis=1), K, cfg.seed)
    inputs = []
    for k in range(K):
        rows = imputed.values[folds != k]
        if len(rows) < 2:
            raise TooFewRows("every batch needs at least two rows")
        inputs.append(covariance(rows))
    params, history, thetas = _train(inputs, lambda outs: glad.meta_loss(S_full, outs), cfg)
    combined = linalg.symmetrize(consensus_combine(thetas))
    return FitResult(combined, history, "missing", cfg.seed, cfg.to_dict(), list(X.features),
                     params=params, folds=K, batch_precisions=thetas)


def fit(X, cfg: FitConfig) -> FitResult:
    """Dispatch on ``cfg.mode``; multitask expects a list of datasets."""
    if cfg.mode == "direct":
        return fit_direct(X, cfg)
    if cfg.mode == "cv":
        return fit_cv(X, cfg)
    if cfg.mode == "missing":
        return fit_missing(X, cfg)
    return fit_multitask(X, cfg)
