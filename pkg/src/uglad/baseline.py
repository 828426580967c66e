"""Classical graphical lasso by ADMM, plus a cross-validated wrapper.

Objective: ``-log det(Theta) + tr(S Theta) + rho * sum_{i != j} |Theta_ij|``.
"""

from __future__ import annotations

import logging

import numpy as np

from . import linalg
from .data import Dataset, covariance
from .errors import InvalidArgument, NoConvergence

log = logging.getLogger(__name__)


def glasso_objective(S, theta, rho) -> float:
    off = np.abs(theta).sum() - np.abs(np.diagonal(theta)).sum()
    return float(-linalg.log_det_spd(theta) + np.sum(S * theta) + rho * off)


def kkt_residual(S, theta, rho) -> float:
    """Largest violation of ``0 in -theta^-1 + S + rho * d||theta||_{1,off}``."""
    g = S - linalg.spd_inverse(theta)
    d = g.shape[0]
    off = ~np.eye(d, dtype=bool)
    nz = off & (theta != 0.0)
    zero = off & (theta == 0.0)
    res = np.zeros_like(g)
    res[~off] = np.abs(g[~off])
    res[nz] = np.abs(g[nz] + rho * np.sign(theta[nz]))
    res[zero] = np.maximum(np.abs(g[zero]) - rho, 0.0)
    return float(res.max())


def admm_glasso(S, rho: float, penalty: float = 1.0, iters: int = 1000, tol: float = 1e-6,
                warm_start=None, history: list | None = None, adaptive: bool = True) -> np.ndarray:
    """Solve the graphical lasso by ADMM on the split ``Theta = Z``.

    The returned estimate is the sparse iterate ``Z`` (SPD at convergence).
    Convergence means the KKT residual of ``Z`` is below ``tol``.
    ``warm_start`` is an optional ``(Z, Y)`` pair, ``Y`` the unscaled multiplier.  When ``history`` is a list,
    the objective of every SPD ``Theta`` iterate is appended to it.

    With ``adaptive`` the penalty starts at ``penalty`` and is rebalanced
    (factor 2 whenever the primal and dual residuals differ by more than 10x).
    """
    z, _ = _admm(S, rho, penalty, iters, tol, warm_start, history, adaptive)
    return z


def _admm(S, rho, penalty, iters, tol, warm_start, history=None, adaptive=True):
    S = linalg.symmetrize(np.asarray(S, dtype=np.float64))
    if rho <= 0 or penalty <= 0:
        raise InvalidArgument("rho and the ADMM penalty must be positive")
    d = S.shape[0]
    off = ~np.eye(d, dtype=bool)
    if warm_start is None:
        z = np.diag(1.0 / np.maximum(np.diagonal(S), 1e-12))
        u = np.zeros((d, d))
    else:
        z, y = (np.array(m, dtype=np.float64) for m in warm_start)
        u = y / penalty
    # u is the scaled dual variable (multiplier / penalty)
    for it in range(iters):
        w, V = linalg.sym_eig(penalty * (z - u) - S)
        theta = linalg.symmetrize((V * ((w + np.sqrt(w * w + 4.0 * penalty)) / (2.0 * penalty))) @ V.T)
        if history is not None:
            history.append(glasso_objective(S, theta, rho))
        v = theta + u
        z_prev = z
        kappa = rho / penalty
        z = np.where(off, np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0), v)
        u = v - z
        if linalg.is_spd(z) and kkt_residual(S, z, rho) < tol:
            return z, penalty * u
        if adaptive and it % 10 == 9:
            r_primal = np.linalg.norm(theta - z)
            r_dual = penalty * np.linalg.norm(z - z_prev)
            if r_primal > 10.0 * r_dual:
                penalty *= 2.0
                u /= 2.0
            elif r_dual > 10.0 * r_primal:
                penalty /= 2.0
                u *= 2.0
    raise NoConvergence(f"ADMM did not reach KKT residual {tol:g} in {iters} iterations")


def default_rho_grid(S, n: int = 8, ratio: float = 1e-2) -> list[float]:
    """Log-spaced grid from the smallest rho giving a diagonal solution downwards."""
    d = S.shape[0]
    rho_max = float(np.max(np.abs(S[~np.eye(d, dtype=bool)]))) if d > 1 else 1.0
    rho_max = max(rho_max, 1e-8)
    return list(np.geomspace(rho_max, rho_max * ratio, n))


def _holdout_loglik(S_test, theta) -> float:
    return -(-linalg.log_det_spd(theta) + float(np.sum(S_test * theta)))


def baseline_cv(X: Dataset, rho_grid=None, folds: int = 3, seed=0, tol: float = 1e-5,
                iters: int = 5000, return_rho: bool = False):
    """Pick rho maximizing mean held-out Gaussian log-likelihood, then refit on all rows."""
    values = X.values if isinstance(X, Dataset) else np.asarray(X, dtype=np.float64)
    S_full = covariance(values)
    grid = list(rho_grid) if rho_grid is not None else default_rho_grid(S_full)
    if not grid:
        raise InvalidArgument("rho grid must be non-empty")
    m = values.shape[0]
    if len(grid) > 1:
        if folds < 2 or m < 2 * folds:
            raise InvalidArgument("not enough rows for the requested folds")
        perm = np.random.default_rng(seed).permutation(m)
        assign = np.empty(m, dtype=int)
        assign[perm] = np.arange(m) % folds
        scores = np.zeros(len(grid))
        for k in range(folds):
            S_tr = covariance(values[assign != k])
            S_te = covariance(values[assign == k])
            warm = None
            # descending rho: each solve warm-starts the next
            order = [i for i, _ in sorted(enumerate(grid), key=lambda t: -t[1])]
            for pos, i in enumerate(order):
                try:
                    theta, u = _solve(S_tr, grid[i], tol, iters, warm)
                except NoConvergence:
                    # smaller rho on this fold is only harder; drop the rest of the path
                    log.warning("baseline: rho=%.3g did not converge on fold %d; skipping it and smaller values",
                                grid[i], k)
                    scores[order[pos:]] = -np.inf
                    break
                warm = (theta, u)
                scores[i] += _holdout_loglik(S_te, theta) / folds
        candidates = [grid[i] for i in np.argsort(-scores, kind="stable") if np.isfinite(scores[i])]
        if not candidates:
            raise NoConvergence("ADMM failed at every rho on the grid")
    else:
        candidates = grid[:1]
    for best in candidates:
        try:
            theta, _ = _solve(S_full, best, tol, iters, None)
            break
        except NoConvergence:
            if best == candidates[-1]:
                raise
            log.warning("baseline: refit at rho=%.3g did not converge; trying the next best", best)
    return (theta, best) if return_rho else theta


def _solve(S, rho, tol, iters, warm):
    try:
        return _admm(S, rho, 1.0, iters, tol, warm)
    except NoConvergence:
        # retry from scratch before giving up; warm starts can stall on near-singular S
        if warm is None:
            raise
        return _admm(S, rho, 1.0, iters, tol, None)
