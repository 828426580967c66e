"""Scenario files and the method-comparison grid behind ``uglad compare``.

A scenario is a plain ``key = value`` file; ``#`` starts a comment and lists
are comma separated::

    methods  = uglad-cv, baseline-cv
    d        = 25
    p        = 0.1
    M        = 10, 25, 50
    n_graphs = 20
    seed     = 0

Every method sees the same graph, samples and dropout mask within a cell, so
comparisons are paired.  Cells run in a process pool sized by ``UGLAD_THREADS``
(default: all cores).
"""

from __future__ import annotations

import csv
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baseline, data, fit, metrics
from .errors import InvalidArgument, ParseError, UgladError
from .glad import UnrollConfig

METHODS = (
    "uglad-direct",
    "uglad-cv",
    "uglad-missing",
    "uglad-multitask",
    "uglad-mean-impute",
    "baseline-cv",
    "baseline-mean-impute",
    "baseline-per-task",
)
THREADS_ENV = "UGLAD_THREADS"


@dataclass
class Scenario:
    methods: list
    d: int = 25
    p: float = 0.1
    M: list = field(default_factory=lambda: [10])
    dropout: list = field(default_factory=lambda: [0.0])
    n_graphs: int = 20
    seed: int = 0
    epochs: int = 250
    lr: float = 0.002
    unroll: int = 30
    folds: int = 3
    tasks: int = 10
    p_range: list = field(default_factory=lambda: [0.05, 0.2])
    name: str = "scenario"

    def __post_init__(self):
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise InvalidArgument(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
        if self.d < 2 or self.n_graphs < 1 or self.tasks < 1:
            raise InvalidArgument("d must be >= 2, n_graphs and tasks >= 1")
        if not all(0.0 <= f < 1.0 for f in self.dropout):
            raise InvalidArgument("dropout fractions must lie in [0, 1)")
        if len(self.p_range) != 2 or not 0.0 <= self.p_range[0] <= self.p_range[1] <= 1.0:
            raise InvalidArgument("p_range needs two probabilities, low <= high")

    @property
    def columns(self) -> list:
        """(M, dropout) pairs, the table columns."""
        return [(m, f) for m in self.M for f in self.dropout]

    def to_dict(self):
        return asdict(self)


_INT_KEYS = {"d", "n_graphs", "seed", "epochs", "unroll", "folds", "tasks"}
_FLOAT_KEYS = {"p", "lr"}
_INT_LISTS = {"M"}
_FLOAT_LISTS = {"dropout", "p_range"}
_ALIASES = {"n-graphs": "n_graphs", "graphs": "n_graphs", "base_seed": "seed", "base-seed": "seed",
            "m": "M", "p-range": "p_range", "L": "unroll", "K": "tasks"}


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    fields = {"name": name}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        items = [v.strip() for v in value.split(",") if v.strip()]
        try:
            if key == "methods":
                fields[key] = items
            elif key == "name":
                fields[key] = value
            elif key in _INT_KEYS:
                fields[key] = int(value)
            elif key in _FLOAT_KEYS:
                fields[key] = float(value)
            elif key in _INT_LISTS:
                fields[key] = [int(v) for v in items]
            elif key in _FLOAT_LISTS:
                fields[key] = [float(v) for v in items]
            else:
                raise ParseError(f"unknown key {key!r}", line=lineno)
        except ValueError:
            raise ParseError(f"bad value for {key!r}: {value!r}", line=lineno) from None
    if "methods" not in fields:
        raise ParseError("scenario must list methods")
    return Scenario(**fields)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        text = fh.read()
    return parse_scenario(text, name=os.path.splitext(os.path.basename(path))[0])


def _seed(*parts) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def thread_count() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            n = int(value)
        except ValueError:
            raise InvalidArgument(f"{THREADS_ENV} must be an integer") from None
        return max(n, 1)
    return os.cpu_count() or 1


@dataclass
class Cell:
    method: str
    graph: int
    M: int
    dropout: float
    reports: list  # MetricReport per graph (several for multitask)
    seconds: float = 0.0


def _fit_config(sc: Scenario, mode: str, seed: int) -> fit.FitConfig:
    return fit.FitConfig(mode=mode, epochs=sc.epochs, lr=sc.lr, unroll=UnrollConfig(L=sc.unroll),
                         folds=sc.folds, seed=seed, lr_override=True)


def _instance(sc: Scenario, g: int, M: int, dropout: float, task: int | None = None):
    """Truth, complete samples and (maybe) dropped-out samples for one graph."""
    if task is None:
        p = sc.p
        tag = (sc.seed, g)
    else:
        p = float(np.random.default_rng(_seed(sc.seed, g, task, 7)).uniform(*sc.p_range))
        tag = (sc.seed, g, task)
    truth = data.generate_precision(sc.d, p, _seed(*tag, 0))
    X = data.sample_mvn(truth, M, _seed(*tag, M, 1))
    if dropout > 0:
        X = data.inject_dropout(X, dropout, _seed(*tag, M, int(round(dropout * 1e6)), 2))
    return truth, X


def _run_one(sc: Scenario, method: str, g: int, M: int, dropout: float) -> Cell:
    start = time.perf_counter()
    fit_seed = _seed(sc.seed, g, 3)
    if method in ("uglad-multitask", "baseline-per-task"):
        pairs = [_instance(sc, g, M, dropout, task=k) for k in range(sc.tasks)]
        truths = [t for t, _ in pairs]
        Xs = [data.mean_impute(X) if X.has_missing else X for _, X in pairs]
        if method == "uglad-multitask":
            thetas = fit.fit_multitask(Xs, _fit_config(sc, "multitask", fit_seed)).precision
        else:
            thetas = [baseline.baseline_cv(X, folds=sc.folds, seed=fit_seed) for X in Xs]
        reports = [metrics.aupr_auc(th, t) for th, t in zip(thetas, truths)]
        return Cell(method, g, M, dropout, reports, time.perf_counter() - start)

    truth, X = _instance(sc, g, M, dropout)
    if method == "uglad-missing":
        theta = fit.fit_missing(X, _fit_config(sc, "missing", fit_seed)).precision
    else:
        complete = data.mean_impute(X) if X.has_missing else X
        if method == "uglad-direct":
            theta = fit.fit_direct(complete, _fit_config(sc, "direct", fit_seed)).precision
        elif method == "uglad-mean-impute":
            theta = fit.fit_direct(data.mean_impute(X), _fit_config(sc, "direct", fit_seed)).precision
        elif method == "uglad-cv":
            theta = fit.fit_cv(complete, _fit_config(sc, "cv", fit_seed)).precision
        else:  # baseline-cv, baseline-mean-impute
            theta = baseline.baseline_cv(complete, folds=sc.folds, seed=fit_seed)
    return Cell(method, g, M, dropout, [metrics.aupr_auc(theta, truth)], time.perf_counter() - start)


def _run_cell(sc, method, g, M, dropout) -> Cell:
    try:
        return _run_one(sc, method, g, M, dropout)
    except UgladError as exc:
        exc.args = (f"{method}, graph {g}, M={M}, dropout={dropout:g}: {exc.args[0] if exc.args else exc}",
                    *exc.args[1:])
        raise


def _run_args(args):
    return _run_cell(*args)


def run_scenario(sc: Scenario, threads: int | None = None, progress=None) -> list[Cell]:
    jobs = [(sc, method, g, M, f) for method in sc.methods for (M, f) in sc.columns for g in range(sc.n_graphs)]
    threads = thread_count() if threads is None else threads
    cells = []
    if threads <= 1:
        for job in jobs:
            cells.append(_run_cell(*job))
            if progress:
                progress(cells[-1])
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for cell in pool.map(_run_args, jobs):
                cells.append(cell)
                if progress:
                    progress(cell)
    return cells


@dataclass
class Summary:
    method: str
    M: int
    dropout: float
    n: int
    aupr_mean: float
    aupr_std: float
    auc_mean: float
    auc_std: float
    seconds: float


def summarize(sc: Scenario, cells: list[Cell]) -> list[Summary]:
    rows = []
    for method in sc.methods:
        for M, f in sc.columns:
            sel = [c for c in cells if c.method == method and c.M == M and c.dropout == f]
            reps = [r for c in sel for r in c.reports]
            if not reps:
                continue
            aupr = np.array([r.aupr for r in reps])
            auc = np.array([r.auc for r in reps])
            rows.append(Summary(method, M, f, len(reps), float(aupr.mean()), float(aupr.std()),
                                float(auc.mean()), float(auc.std()), float(sum(c.seconds for c in sel))))
    return rows


def to_csv(rows: list[Summary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "M", "dropout", "n", "aupr_mean", "aupr_std", "auc_mean", "auc_std", "seconds"])
    for r in rows:
        w.writerow([r.method, r.M, r.dropout, r.n, f"{r.aupr_mean:.6f}", f"{r.aupr_std:.6f}",
                    f"{r.auc_mean:.6f}", f"{r.auc_std:.6f}", f"{r.seconds:.2f}"])
    return buf.getvalue()


def to_table(sc: Scenario, rows: list[Summary]) -> str:
    """Two blocks (AUPR, AUC), methods as rows and (M, dropout) as columns."""
    cols = sc.columns
    vary_dropout = len(sc.dropout) > 1
    heads = [f"drop={f:g}" if vary_dropout and len(sc.M) == 1 else
             (f"M={m},drop={f:g}" if vary_dropout else f"M={m}") for m, f in cols]
    by = {(r.method, r.M, r.dropout): r for r in rows}
    out = []
    for metric in ("aupr", "auc"):
        width = max(len(m) for m in sc.methods)
        cells = [[metric.upper().ljust(width)] + [h.center(15) for h in heads]]
        for method in sc.methods:
            line = [method.ljust(width)]
            for m, f in cols:
                r = by.get((method, m, f))
                line.append("-".center(15) if r is None else
                            f"{getattr(r, metric + '_mean'):.3f} ± {getattr(r, metric + '_std'):.3f}".center(15))
            cells.append(line)
        out.extend("  ".join(c) for c in cells)
        out.append("")
    return "\n".join(out)
