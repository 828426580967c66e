"""Pure-Python counterparts of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same return conventions; row and column updates are
vectorized with numpy slices rather than scalar loops.
"""

import math

import numpy as np


def cholesky_lower(a):
    n = a.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = a[j, j] - L[j, :j] @ L[j, :j]
        if not s > 0.0:
            return L, j
        L[j, j] = math.sqrt(s)
        if j + 1 < n:
            L[j + 1:, j] = (a[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L, -1


def jacobi_eigh(a_in, max_sweeps, tol):
    a = np.array(a_in, dtype=np.float64, copy=True)
    n = a.shape[0]
    v = np.eye(n)
    thresh = tol * tol * float(np.sum(a * a))
    iu = np.triu_indices(n, 1)
    for sweep in range(max_sweeps + 1):
        off = float(np.sum(a[iu] ** 2))
        if off <= thresh or off == 0.0:
            return np.diagonal(a).copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + math.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q]
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :]
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    return np.diagonal(a).copy(), v, -1


def tri_inverse_lower(L):
    n = L.shape[0]
    X = np.zeros((n, n))
    for i in range(n):
        # row i of L @ X = e_i
        rhs = -L[i, :i] @ X[:i, :]
        rhs[i] += 1.0
        X[i, :] = rhs / L[i, i]
    return X
