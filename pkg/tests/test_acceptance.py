"""End-to-end acceptance checks: the three replication grids and the property suite.

Each criterion records one PASS/FAIL line; ``conftest.py`` prints them all in
the terminal summary.  The grids run through the same scenario files and seeds
as ``uglad compare scenarios/<name>.txt``.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import random_cov, random_spd
from test_autodiff import _unrolled_loss
from test_baseline import prox_gradient_oracle
from test_glad import pinned_params
from test_metrics import _instance as metric_instance, auc_oracle, aupr_oracle
from uglad import baseline, bench, fit, glad, linalg, metrics
from uglad.autodiff import finite_difference_check

LINES = []


def check(name, ok, detail):
    LINES.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def note(name, detail):
    LINES.append(f"INFO  {name}: {detail}")


def within(x, lo, hi):
    return lo <= x <= hi


def _run(sc):
    start = time.perf_counter()
    rows = bench.summarize(sc, bench.run_scenario(sc))
    return {(r.method, r.M, r.dropout): r for r in rows}, time.perf_counter() - start


def _paired(cells, method_a, method_b, attr):
    """Mean over paired runs of a.attr - b.attr."""
    a = {(c.graph, c.M, c.dropout): c for c in cells if c.method == method_a}
    b = {(c.graph, c.M, c.dropout): c for c in cells if c.method == method_b}
    diffs = [getattr(ra, attr) - getattr(rb, attr)
             for k in a.keys() & b.keys() for ra, rb in zip(a[k].reports, b[k].reports)]
    return float(np.mean(diffs))


# ---------------------------------------------------------------- few samples


@pytest.fixture(scope="module")
def few_samples():
    sc = replace(bench.load_scenario("scenarios/few_samples.txt"), M=[10, 50])
    rows, seconds = _run(sc)
    note("few samples runtime", f"{seconds / 60:.1f} min on {bench.thread_count()} worker(s) (budget 15 min on 8 cores)")
    return rows


@pytest.mark.slow
def test_few_samples_m10_uglad(few_samples):
    r = few_samples["uglad-cv", 10, 0.0]
    check("few samples, M=10, uGLAD-cv AUC in [0.518, 0.626]", within(r.auc_mean, 0.518, 0.626),
          f"{r.auc_mean:.3f} ± {r.auc_std:.3f}")
    check("few samples, M=10, uGLAD-cv AUPR in [0.101, 0.217]", within(r.aupr_mean, 0.101, 0.217),
          f"{r.aupr_mean:.3f} ± {r.aupr_std:.3f}")


@pytest.mark.slow
def test_few_samples_m10_baseline(few_samples):
    r = few_samples["baseline-cv", 10, 0.0]
    check("few samples, M=10, baseline-cv AUC in [0.49, 0.53]", within(r.auc_mean, 0.49, 0.53),
          f"{r.auc_mean:.3f} ± {r.auc_std:.3f}")


@pytest.mark.slow
def test_few_samples_m10_uglad_beats_baseline(few_samples):
    u, b = few_samples["uglad-cv", 10, 0.0].auc_mean, few_samples["baseline-cv", 10, 0.0].auc_mean
    check("few samples, M=10, uGLAD AUC > baseline AUC", u > b, f"{u:.3f} vs {b:.3f}")


@pytest.mark.slow
def test_few_samples_m50_uglad(few_samples):
    r = few_samples["uglad-cv", 50, 0.0]
    check("few samples, M=50, uGLAD-cv AUC in [0.61, 0.70]", within(r.auc_mean, 0.61, 0.70),
          f"{r.auc_mean:.3f} ± {r.auc_std:.3f}")


# ---------------------------------------------------------------- dropout


@pytest.fixture(scope="module")
def dropout():
    base = bench.load_scenario("scenarios/dropout.txt")
    start = time.perf_counter()
    cells = bench.run_scenario(replace(base, methods=["uglad-missing"], dropout=[0.25, 0.75]))
    cells += bench.run_scenario(replace(base, methods=["uglad-mean-impute"], dropout=[0.75]))
    seconds = time.perf_counter() - start
    note("dropout runtime", f"{seconds / 60:.1f} min on {bench.thread_count()} worker(s) (budget 30 min)")
    sc = replace(base, methods=["uglad-missing", "uglad-mean-impute"], dropout=[0.25, 0.75])
    rows = {(r.method, r.M, r.dropout): r for r in bench.summarize(sc, cells)}
    return rows, cells


@pytest.mark.slow
def test_high_dropout_missing_beats_mean_impute(dropout):
    rows, cells = dropout
    a, b = rows["uglad-missing", 500, 0.75].auc_mean, rows["uglad-mean-impute", 500, 0.75].auc_mean
    check("dropout 0.75, uGLAD-missing AUC >= uGLAD-mean-impute AUC", a >= b,
          f"{a:.3f} vs {b:.3f} (paired mean difference {_paired(cells, 'uglad-missing', 'uglad-mean-impute', 'auc'):+.4f})")


@pytest.mark.slow
def test_high_dropout_auc_band(dropout):
    r = dropout[0]["uglad-missing", 500, 0.75]
    check("dropout 0.75, uGLAD-missing AUC in [0.48, 0.65]", within(r.auc_mean, 0.48, 0.65),
          f"{r.auc_mean:.3f} ± {r.auc_std:.3f}")


@pytest.mark.slow
def test_low_dropout_aupr_band(dropout):
    r = dropout[0]["uglad-missing", 500, 0.25]
    check("dropout 0.25, uGLAD-missing AUPR in [0.41, 0.81]", within(r.aupr_mean, 0.41, 0.81),
          f"{r.aupr_mean:.3f} ± {r.aupr_std:.3f}")


# ---------------------------------------------------------------- multitask


@pytest.fixture(scope="module")
def multitask():
    sc = bench.load_scenario("scenarios/multitask.txt")
    rows, seconds = _run(sc)
    note("multitask runtime", f"{seconds / 60:.1f} min on {bench.thread_count()} worker(s) (budget 20 min)")
    return rows


@pytest.mark.slow
def test_multitask_beats_per_task(multitask):
    u, b = multitask["uglad-multitask", 25, 0.0].aupr_mean, multitask["baseline-per-task", 25, 0.0].aupr_mean
    check("multitask, uGLAD-multitask AUPR >= baseline-per-task AUPR", u >= b, f"{u:.3f} vs {b:.3f}")


@pytest.mark.slow
def test_multitask_auc_band(multitask):
    r = multitask["uglad-multitask", 25, 0.0]
    check("multitask, uGLAD-multitask AUC in [0.48, 0.67]", within(r.auc_mean, 0.48, 0.67),
          f"{r.auc_mean:.3f} ± {r.auc_std:.3f}")


# ---------------------------------------------------------------- property suite

_PROPERTY_SECONDS = []


@pytest.fixture
def timed():
    start = time.perf_counter()
    yield
    _PROPERTY_SECONDS.append(time.perf_counter() - start)


def test_property_spd_every_step(timed):
    rng = np.random.default_rng(101)
    failures = 0
    for i in range(100):
        d = int(rng.integers(3, 26))
        S = random_cov(d, int(rng.integers(2, 3 * d)), rng)
        p = glad.GladParams.init(seed=i, scale=float(rng.uniform(0.05, 3.0)), t=float(rng.uniform(0.1, 3.0)))
        _, states = glad.glad_forward(S, p, glad.UnrollConfig(L=30), trajectory=True)
        failures += sum(not linalg.is_spd(s.theta) for s in states)
    check("property: SPD at every step, 100 fits, L=30", failures == 0, f"{failures} Cholesky failures")


def test_property_permutation_equivariance(timed):
    rng = np.random.default_rng(102)
    worst = 0.0
    for i in range(50):
        d = int(rng.integers(3, 26))
        S = random_cov(d, 2 * d, rng)
        P = np.eye(d)[rng.permutation(d)]
        p = glad.GladParams.init(seed=i, scale=0.5)
        a = glad.glad_forward(S, p).theta
        b = glad.glad_forward(P @ S @ P.T, p).theta
        worst = max(worst, float(np.max(np.abs(P @ a @ P.T - b))))
    check("property: permutation equivariance within 1e-9, 50 pairs", worst < 1e-9, f"max deviation {worst:.2e}")


def test_property_gradient_vs_finite_differences(timed):
    rng = np.random.default_rng(103)
    worst = 0.0
    for i in range(20):
        S = random_cov(5, 12, rng)
        params = glad.GladParams.init(seed=i, scale=0.5, t=rng.uniform(0.5, 2.0)).arrays
        worst = max(worst, finite_difference_check(_unrolled_loss(S, 4), params))
    check("property: autodiff vs central differences < 1e-4, L=4, d=5, 20 draws", worst < 1e-4,
          f"max relative error {worst:.2e}")


def test_property_fixed_point_oracle(timed):
    rng = np.random.default_rng(104)
    p, cfg = pinned_params(), glad.UnrollConfig(L=200)
    worst = 0.0
    for _ in range(20):
        S = random_spd(10, rng, cond=10.0)
        inv = np.linalg.inv(S)
        theta = glad.glad_forward(S, p, cfg).theta
        worst = max(worst, float(np.linalg.norm(theta - inv) / np.linalg.norm(inv)))
    check("property: fixed-point oracle < 1e-3, 20 instances, L=200", worst < 1e-3, f"max relative error {worst:.2e}")


def test_property_sqrt_residual(timed):
    rng = np.random.default_rng(105)
    worst = 0.0
    for _ in range(100):
        a = random_spd(int(rng.integers(2, 26)), rng, cond=10 ** rng.uniform(0, 4))
        b = linalg.matrix_sqrt_spd(a)
        worst = max(worst, float(np.linalg.norm(b @ b - a) / np.linalg.norm(a)))
    check("property: matrix sqrt residual < 1e-7, 100 draws, cond <= 1e4", worst < 1e-7, f"max residual {worst:.2e}")


def test_property_metrics_oracle(timed):
    rng = np.random.default_rng(106)
    worst = 0.0
    for _ in range(500):
        d = int(rng.integers(3, 11))
        pred, adj = metric_instance(rng, d)
        iu = np.triu_indices(d, 1)
        labels, scores = list(adj[iu]), list(np.abs(pred[iu]))
        r = metrics.aupr_auc(pred, adj)
        worst = max(worst, abs(r.auc - auc_oracle(labels, scores)), abs(r.aupr - aupr_oracle(labels, scores)))
    check("property: AUPR/AUC equal the exhaustive oracle, 500 trials", worst < 1e-12, f"max deviation {worst:.1e}")


def test_property_consensus_rule(timed):
    rng = np.random.default_rng(107)
    bad, ties = 0, 0
    for _ in range(1000):
        K = int(rng.integers(1, 8))
        vals = rng.standard_normal(K)
        if K % 2 == 0 and rng.random() < 0.3:
            half = np.abs(vals[: K // 2])
            vals = np.r_[half, -rng.permutation(half)]
        out = fit.consensus_combine([np.array([[v]]) for v in vals])[0, 0]
        balance = np.sum(np.sign(vals[np.abs(vals) > 1e-8]))
        mag = np.min(np.abs(vals))
        if balance == 0:
            ties += 1
            bad += out != 0.0
        else:
            bad += not (np.sign(out) == np.sign(balance) and abs(out) == mag)
        bad += abs(out) > mag
    check("property: consensus magnitude bound and sign rule, 1000 tuples", bad == 0,
          f"{bad} violations ({ties} ties)")


def test_property_admm_against_oracle(timed):
    rng = np.random.default_rng(108)
    worst_kkt = worst_obj = 0.0
    for _ in range(10):
        S = random_cov(5, 12, rng)
        rho = float(rng.uniform(0.05, 0.3))
        theta = baseline.admm_glasso(S, rho, tol=1e-10, iters=20000)
        _, ref = prox_gradient_oracle(S, rho)
        worst_kkt = max(worst_kkt, baseline.kkt_residual(S, theta, rho))
        worst_obj = max(worst_obj, abs(baseline.glasso_objective(S, theta, rho) - ref))
    check("property: ADMM KKT < 1e-6 and objective within 1e-6 of oracle, 10 instances",
          worst_kkt < 1e-6 and worst_obj < 1e-6, f"KKT {worst_kkt:.1e}, objective gap {worst_obj:.1e}")


def test_property_suite_runtime():
    total = sum(_PROPERTY_SECONDS)
    check("property suite runtime < 5 min", len(_PROPERTY_SECONDS) == 8 and total < 300, f"{total:.1f} s")
