"""Command-line entry point: ``uglad {simulate,fit,evaluate,compare,export-graph}``.

Exit codes: 0 success, 2 bad arguments, 3 data errors, 4 numerical failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__, bench, data, fit, io, metrics
from .errors import DataError, InvalidArgument, NumericalError, UgladError
from .glad import UnrollConfig

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("uglad")


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_simulate(args) -> int:
    start = time.perf_counter()
    truth = data.generate_precision(args.d, args.p, args.seed)
    X = data.sample_mvn(truth, args.samples, args.seed + 1)
    if args.dropout > 0:
        X = data.inject_dropout(X, args.dropout, args.seed + 2)
    out = Path(args.out)
    truth_out = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    io.write_csv(out, X)
    io.dump_json(truth_out, io.truth_document(truth, X.features, d=args.d, p=args.p, seed=args.seed))
    config = {"d": args.d, "p": args.p, "samples": args.samples, "dropout": args.dropout}
    io.dump_json(_manifest_path(out), io.manifest("simulate", config, args.seed,
                                                  duration=time.perf_counter() - start))
    print(f"wrote {out} ({args.samples} x {args.d}) and {truth_out}")
    return EXIT_OK


def _load_inputs(path: Path, mode: str):
    if mode == "multitask":
        if not path.is_dir():
            raise InvalidArgument("multitask mode needs a directory of CSV files")
        files = sorted(path.glob("*.csv"))
        if not files:
            raise InvalidArgument(f"no CSV files in {path}")
        return [io.read_csv(f) for f in files]
    if path.is_dir():
        raise InvalidArgument(f"{path} is a directory; only multitask mode takes one")
    X = io.read_csv(path)
    if X.has_missing and mode != "missing":
        raise InvalidArgument("input has missing entries; use --mode missing")
    if mode == "missing" and not X.has_missing:
        log.warning("uglad: warning: no missing entries in %s; missing mode will still run", path)
    return X


def cmd_fit(args) -> int:
    start = time.perf_counter()
    cfg = fit.FitConfig(mode=args.mode, epochs=args.epochs, lr=args.lr, unroll=UnrollConfig(L=args.unroll),
                        folds=args.folds, seed=args.seed, lr_override=args.lr_override,
                        cv_holdout=args.holdout, multitask_split=args.task_split)
    X = _load_inputs(Path(args.input), args.mode)
    result = fit.fit(X, cfg)
    config = cfg.to_dict()
    doc_manifest = io.manifest("fit", config, args.seed, inputs=[args.input],
                               duration=time.perf_counter() - start)
    out = Path(args.out)
    io.dump_json(out, io.precision_document(result, doc_manifest))
    if args.params:
        Path(args.params).write_text(result.params.to_json())
    msg = f"wrote {out} (mode={args.mode}, epochs run={len(result.loss_history)}"
    if result.best_epoch is not None:
        msg += f", best epoch={result.best_epoch}"
    print(msg + ")")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if len(args.precision) != len(args.truth):
        raise InvalidArgument("give one truth file per precision file")
    reports, labels = [], []
    for p_path, t_path in zip(args.precision, args.truth):
        _, mats = io.read_precisions(p_path)
        truths = [io.read_truth(t) for t in t_path.split(",")]
        if len(truths) != len(mats):
            raise InvalidArgument(f"{p_path} holds {len(mats)} matrices but {len(truths)} truth files were given")
        for k, (theta, truth) in enumerate(zip(mats, truths)):
            reports.append(metrics.aupr_auc(theta, truth))
            labels.append(p_path if len(mats) == 1 else f"{p_path}[{k}]")
    doc = io.metrics_document(reports, labels)
    for label, r in zip(labels, reports):
        print(f"{label}: AUPR {r.aupr:.3f}  AUC {r.auc:.3f}")
    if len(reports) > 1:
        print(f"mean over {len(reports)}: AUPR {doc['aupr_mean']:.3f} ± {doc['aupr_std']:.3f}  "
              f"AUC {doc['auc_mean']:.3f} ± {doc['auc_std']:.3f}")
    if args.out:
        io.dump_json(args.out, doc)
    return EXIT_OK


def cmd_compare(args) -> int:
    start = time.perf_counter()
    sc = bench.load_scenario(args.scenario)

    def progress(cell):
        log.info("%s graph=%d M=%d dropout=%g %.1fs", cell.method, cell.graph, cell.M, cell.dropout, cell.seconds)

    cells = bench.run_scenario(sc, threads=args.threads, progress=progress)
    rows = bench.summarize(sc, cells)
    print(bench.to_table(sc, rows))
    if args.out:
        out = Path(args.out)
        out.write_text(bench.to_csv(rows))
        io.dump_json(_manifest_path(out), io.manifest("compare", sc.to_dict(), sc.seed, inputs=[args.scenario],
                                                      duration=time.perf_counter() - start))
    return EXIT_OK


def cmd_export_graph(args) -> int:
    features, mats = io.read_precisions(args.precision)
    if not 0 <= args.task < len(mats):
        raise InvalidArgument(f"task index {args.task} out of range (0..{len(mats) - 1})")
    text = io.to_dot(mats[args.task], features, threshold=args.threshold)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _fraction(value: str) -> float:
    x = float(value)
    if not 0.0 <= x < 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return x


def _positive_int(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return n


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uglad", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a random sparse graph and Gaussian samples")
    p.add_argument("-d", type=_positive_int, default=25, help="number of features")
    p.add_argument("-p", type=float, default=0.1, help="edge probability")
    p.add_argument("-M", "--samples", type=_positive_int, default=100)
    p.add_argument("--dropout", type=_fraction, default=0.0, help="fraction of entries to mark missing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="samples CSV")
    p.add_argument("--truth", help="ground-truth JSON (default: <out>.truth.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="recover a precision matrix from samples")
    p.add_argument("input", help="samples CSV, or a directory of CSVs for multitask")
    p.add_argument("-o", "--out", required=True, help="precision JSON")
    p.add_argument("--mode", choices=fit.MODES, default="cv")
    p.add_argument("--epochs", type=_positive_int, default=250)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--lr-override", action="store_true", help="allow a learning rate outside [0.001, 0.005]")
    p.add_argument("-L", "--unroll", type=_positive_int, default=30, help="number of unrolled cells")
    p.add_argument("--folds", type=int, default=3, help="batches for missing mode")
    p.add_argument("--holdout", type=float, default=0.3, help="validation fraction in cv mode")
    p.add_argument("--task-split", action="store_true", help="multitask: score each task on held-out rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--params", help="also save the trained network weights as JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("evaluate", help="AUPR and AUC of recovered edges")
    p.add_argument("--precision", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", required=True,
                   help="truth JSON per precision file; comma-separate several for multitask output")
    p.add_argument("-o", "--out", help="metrics JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run a benchmark scenario file")
    p.add_argument("scenario")
    p.add_argument("-o", "--out", help="summary CSV")
    p.add_argument("--threads", type=_positive_int, help=f"worker processes (default: ${bench.THREADS_ENV} or all cores)")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-graph", help="write the partial-correlation graph as DOT")
    p.add_argument("precision")
    p.add_argument("-o", "--out", help="DOT file (default: stdout)")
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--task", type=int, default=0, help="which matrix of a multitask output")
    p.set_defaults(func=cmd_export_graph)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InvalidArgument as exc:
        print(f"uglad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"uglad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"uglad: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UgladError as exc:  # shape/length mismatches between input files
        print(f"uglad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
