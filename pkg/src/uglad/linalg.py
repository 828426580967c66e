"""Dense SPD linear algebra: Cholesky, log-det, inverse, Jacobi eigensolver, square root.

Every function is pure.  The inner loops of the Cholesky factorization and the
Jacobi sweeps live in ``_kernels`` (compiled) or ``_kernels_py`` (fallback);
see :mod:`uglad._backend`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import NoConvergence, NotPositiveDefinite, ShapeMismatch

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-15
NS_MAX_ITER = 25
NS_TOL = 1e-9
POLISH_BELOW = 1e-13


def _square(a) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ShapeMismatch(f"expected a non-empty square matrix, got shape {a.shape}")
    return a


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def is_symmetric(a: np.ndarray, rtol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return bool(np.all(np.abs(a - a.T) <= rtol * np.maximum(1.0, np.abs(a))))


def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.  Reads the lower triangle only."""
    a = _square(a)
    L, status = kernels.cholesky_lower(a)
    if status >= 0:
        raise NotPositiveDefinite(f"non-positive pivot at index {status}")
    return np.asarray(L)


def is_spd(a) -> bool:
    try:
        cholesky(a)
    except NotPositiveDefinite:
        return False
    return True


def log_det_spd(a) -> float:
    L = cholesky(a)
    return float(2.0 * np.sum(np.log(np.diagonal(L))))


def spd_inverse(a) -> np.ndarray:
    L = cholesky(a)
    Linv = np.asarray(kernels.tri_inverse_lower(L))
    return symmetrize(Linv.T @ Linv)


def sym_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns) by cyclic Jacobi."""
    a = _square(a)
    w, V, sweeps = kernels.jacobi_eigh(a, JACOBI_MAX_SWEEPS, JACOBI_TOL)
    if sweeps < 0:
        raise NoConvergence(f"Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps")
    w = np.asarray(w)
    V = np.asarray(V)
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


@dataclass
class NewtonSchulzTrace:
    """Iterates kept for reverse-mode differentiation of the square root."""

    scale: float
    ys: list  # Y_0 .. Y_n
    zs: list  # Z_0 .. Z_n
    ts: list  # T_0 .. T_{n-1}


def newton_schulz_sqrt(a, max_iter: int = NS_MAX_ITER, tol: float = NS_TOL, keep: bool = False):
    """Coupled Newton-Schulz iteration for the principal square root.

    ``a`` is pre-scaled by its trace so the spectrum lies in (0, 1].  Returns
    ``(B, trace)`` where ``trace`` is a :class:`NewtonSchulzTrace` when ``keep``
    is set.  Raises :class:`NoConvergence` when the residual test
    ``||B B - a||_F / ||a||_F < tol`` is not met within ``max_iter`` steps.
    """
    a = _square(a)
    n = a.shape[0]
    c = float(np.trace(a))
    if not c > 0.0 or not np.isfinite(c):
        raise NotPositiveDefinite("matrix with non-positive trace has no SPD square root")
    eye = np.eye(n)
    y = a / c
    z = eye
    ys, zs, ts = [y], [z], []
    for _ in range(max_iter):
        t = 1.5 * eye - 0.5 * (z @ y)
        y = y @ t
        z = t @ z
        if keep:
            ts.append(t)
            ys.append(y)
            zs.append(z)
        r = y @ y - a / c
        # ||B B - a|| / ||a|| is invariant to the scale c
        res = np.linalg.norm(r) / np.linalg.norm(a / c)
        if not np.isfinite(res):
            break
        if res < tol:
            if res > POLISH_BELOW:
                # one more quadratic step drives the residual to rounding level
                t = 1.5 * eye - 0.5 * (z @ y)
                y = y @ t
                z = t @ z
                if keep:
                    ts.append(t)
                    ys.append(y)
                    zs.append(z)
            b = symmetrize(np.sqrt(c) * y)
            return b, (NewtonSchulzTrace(c, ys, zs, ts) if keep else None)
    raise NoConvergence("Newton-Schulz square root hit its iteration cap")


def eig_sqrt(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Square root through the eigendecomposition; returns ``(B, w, V)``."""
    w, V = sym_eig(a)
    if w[0] <= 0.0:
        raise NotPositiveDefinite(f"smallest eigenvalue {w[0]:.3e} is not positive")
    s = np.sqrt(w)
    return symmetrize((V * s) @ V.T), w, V


def matrix_sqrt_spd(a) -> np.ndarray:
    """Principal square root of an SPD matrix; Newton-Schulz with eigendecomposition fallback."""
    try:
        b, _ = newton_schulz_sqrt(a)
    except NoConvergence:
        b, _, _ = eig_sqrt(a)
    return b
