# cython: language_level=3
"""Compiled dense kernels: Cholesky factorization and cyclic Jacobi eigensolver.

Both functions mirror ``uglad._kernels_py`` exactly in algorithm; only the
loops are compiled.  They return status codes instead of raising so the
Python wrapper owns the exception types.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


def cholesky_lower(const double[:, ::1] a):
    """Return ``(L, status)``; status is -1 on success, else the failing pivot index."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] L = out
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not s > 0.0:
            return out, j
        L[j, j] = sqrt(s)
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return out, -1


def jacobi_eigh(const double[:, ::1] a_in, int max_sweeps, double tol):
    """Cyclic Jacobi.  Returns ``(w, V, sweeps)``; sweeps == -1 means no convergence."""
    cdef Py_ssize_t n = a_in.shape[0]
    cdef Py_ssize_t p, q, k
    cdef int sweep
    cdef double off, total, apq, theta, t, c, s, akp, akq, tau
    a_arr = np.array(a_in, dtype=np.float64, copy=True)
    v_arr = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr

    total = 0.0
    for p in range(n):
        for q in range(n):
            total += a[p, q] * a[p, q]
    cdef double thresh = tol * tol * total

    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += a[p, q] * a[p, q]
        if off <= thresh or off == 0.0:
            w = np.diagonal(a_arr).copy()
            return w, v_arr, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    akp = a[p, k]
                    akq = a[q, k]
                    a[p, k] = c * akp - s * akq
                    a[q, k] = s * akp + c * akq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    akp = v[k, p]
                    akq = v[k, q]
                    v[k, p] = c * akp - s * akq
                    v[k, q] = s * akp + c * akq
    return np.diagonal(a_arr).copy(), v_arr, -1


def tri_inverse_lower(const double[:, ::1] L):
    """Inverse of a lower-triangular matrix with nonzero diagonal."""
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double s
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] X = out
    for j in range(n):
        X[j, j] = 1.0 / L[j, j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s += L[i, k] * X[k, j]
            X[i, j] = -s / L[i, i]
    return out
