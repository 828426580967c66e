"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Reports the best wall time per call for each kernel, and for one ADMM
baseline solve (whose Jacobi eigendecompositions dominate its cost).
"""

import argparse
import timeit

import numpy as np

from uglad import _backend, _kernels_py, baseline, data, linalg


def spd(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


def best(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _backend.compiled is None:
        print("compiled extension not built; only the fallback can be timed")
    backends = {"python": _kernels_py}
    if _backend.compiled is not None:
        backends["compiled"] = _backend.compiled

    truth = data.generate_precision(25, 0.1, seed=0)
    S = data.covariance(data.sample_mvn(truth, 50, seed=1))
    rho = baseline.default_rho_grid(S)[4]

    rows = []
    for d in (10, 25, 50):
        a = spd(d, d)
        L = np.linalg.cholesky(a)
        for name, k in backends.items():
            rows.append((f"cholesky d={d}", name, best(lambda: k.cholesky_lower(a), args.repeat, 20)))
            rows.append((f"tri_inverse d={d}", name, best(lambda: k.tri_inverse_lower(L), args.repeat, 20)))
            rows.append((f"jacobi_eigh d={d}", name,
                         best(lambda: k.jacobi_eigh(a, linalg.JACOBI_MAX_SWEEPS, linalg.JACOBI_TOL), args.repeat)))

    saved = linalg.kernels
    try:
        for name, k in backends.items():
            linalg.kernels = k
            rows.append(("admm_glasso d=25", name,
                         best(lambda: baseline.admm_glasso(S, rho, tol=1e-6, iters=5000), max(args.repeat // 2, 1))))
    finally:
        linalg.kernels = saved

    print(f"{'kernel':<22}{'backend':<10}{'seconds':>12}{'speedup':>10}")
    ref = {(r[0]): r[2] for r in rows if r[1] == "python"}
    for kernel, name, t in rows:
        print(f"{kernel:<22}{name:<10}{t:>12.6f}{ref[kernel] / t:>9.1f}x")


if __name__ == "__main__":
    main()
