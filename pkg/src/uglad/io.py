"""File formats: sample CSV, precision/truth/metrics JSON, run manifests, DOT graphs."""

from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import NAME as BACKEND
from .data import Dataset, GroundTruth
from .errors import DimensionMismatch, InvalidThreshold, ParseError

PRECISION_FORMAT = "uglad-precision/1"
TRUTH_FORMAT = "uglad-truth/1"
METRICS_FORMAT = "uglad-metrics/1"
MANIFEST_FORMAT = "uglad-manifest/1"

_MISSING = {"", "nan"}


# ---------------------------------------------------------------- CSV


def read_csv(path) -> Dataset:
    """Header row of feature names, one sample per row; empty or NaN cells are missing."""
    text = Path(path).read_text()
    rows = list(csv.reader(_io.StringIO(text)))
    if not rows:
        raise ParseError(f"{path}: empty file", line=1)
    header = [h.strip() for h in rows[0]]
    if not header or any(h == "" for h in header):
        raise ParseError(f"{path}: header has an empty feature name", line=1)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(c.strip() == "" for c in row) and len(row) <= 1:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: expected {len(header)} cells, found {len(row)}", line=lineno)
        parsed = []
        for col, cell in enumerate(row, start=1):
            cell = cell.strip()
            if cell.lower() in _MISSING:
                parsed.append(math.nan)
                continue
            try:
                x = float(cell)
            except ValueError:
                raise ParseError(f"{path}: cannot parse {cell!r} as a number", line=lineno, column=col) from None
            if not math.isfinite(x):
                raise ParseError(f"{path}: non-finite value {cell!r}", line=lineno, column=col)
            parsed.append(x)
        values.append(parsed)
    if not values:
        raise ParseError(f"{path}: no data rows", line=2)
    return Dataset(np.array(values), features=header)


def format_number(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, X: Dataset) -> None:
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(X.features)
    for row, miss in zip(X.values, X.mask):
        writer.writerow(["" if m else format_number(v) for v, m in zip(row, miss)])
    Path(path).write_text(buf.getvalue())


# ---------------------------------------------------------------- JSON


def dump_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, allow_nan=False) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from None


def _matrix(a) -> list:
    return [[float(x) for x in row] for row in np.asarray(a)]


def fingerprint(*paths) -> str:
    h = hashlib.sha256()
    for p in paths:
        p = Path(p)
        files = sorted(p.iterdir()) if p.is_dir() else [p]
        for f in files:
            if f.is_file():
                h.update(f.name.encode())
                h.update(f.read_bytes())
    return h.hexdigest()


def manifest(command: str, config: dict, seed, inputs=(), duration: float = 0.0) -> dict:
    return {
        "format_version": MANIFEST_FORMAT,
        "command": command,
        "config": config,
        "seed": seed,
        "input_fingerprint": fingerprint(*inputs) if inputs else None,
        "tool_version": __version__,
        "backend": BACKEND,
        "duration_seconds": round(float(duration), 6),
    }


def precision_document(result, manifest_doc=None) -> dict:
    doc = {
        "format_version": PRECISION_FORMAT,
        "features": list(result.features),
        "mode": result.mode,
    }
    if result.mode == "multitask":
        doc["precisions"] = [_matrix(p) for p in result.precision]
    else:
        doc["precision"] = _matrix(result.precision)
    if result.best_epoch is not None:
        doc["best_epoch"] = int(result.best_epoch)
    if result.mode == "missing":
        doc["consensus"] = True
        doc["folds"] = int(result.folds)
    doc["loss_history"] = [float(x) for x in result.loss_history]
    if result.val_history is not None:
        doc["validation_history"] = [float(x) for x in result.val_history]
    doc["seed"] = result.seed
    doc["config"] = result.config
    if manifest_doc is not None:
        doc["manifest"] = manifest_doc
    return doc


def read_precisions(path) -> tuple[list, list]:
    """Return ``(features, [matrix, ...])`` from a precision JSON (one or many)."""
    doc = load_json(path)
    if doc.get("format_version") != PRECISION_FORMAT:
        raise ParseError(f"{path}: not a precision document")
    mats = doc["precisions"] if "precisions" in doc else [doc["precision"]]
    return doc["features"], [np.array(m, dtype=np.float64) for m in mats]


def truth_document(truth: GroundTruth, features, **meta) -> dict:
    return {
        "format_version": TRUTH_FORMAT,
        "features": list(features),
        "precision": _matrix(truth.precision),
        "adjacency": [[bool(x) for x in row] for row in truth.adjacency],
        **meta,
    }


def read_truth(path) -> GroundTruth:
    doc = load_json(path)
    if doc.get("format_version") != TRUTH_FORMAT:
        raise ParseError(f"{path}: not a ground-truth document")
    return GroundTruth(np.array(doc["precision"], dtype=np.float64), np.array(doc["adjacency"], dtype=bool))


def metrics_document(reports, labels=None) -> dict:
    per = [r.to_dict() for r in reports]
    if labels is not None:
        for d, label in zip(per, labels):
            d["label"] = label
    aupr = np.array([r.aupr for r in reports])
    auc = np.array([r.auc for r in reports])
    return {
        "format_version": METRICS_FORMAT,
        "n": len(reports),
        "aupr_mean": float(aupr.mean()),
        "aupr_std": float(aupr.std()),
        "auc_mean": float(auc.mean()),
        "auc_std": float(auc.std()),
        "runs": per,
    }


# ---------------------------------------------------------------- DOT


def partial_correlations(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    d = np.sqrt(np.abs(np.diagonal(theta)))
    pc = -theta / np.outer(d, d)
    np.fill_diagonal(pc, 1.0)
    return pc


def to_dot(theta, features, threshold: float = 1e-3, width_scale: float = 5.0) -> str:
    """Undirected graph of partial correlations above ``threshold``: green positive, red negative."""
    if not threshold >= 0:
        raise InvalidThreshold("threshold must be non-negative")
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (len(features), len(features)):
        raise DimensionMismatch("feature names do not match the precision matrix")
    pc = partial_correlations(theta)
    lines = ["graph uglad {", "  node [shape=ellipse];"]
    for name in features:
        lines.append(f"  {json.dumps(name)};")
    n = len(features)
    for i in range(n):
        for j in range(i + 1, n):
            r = pc[i, j]
            if abs(r) > threshold:
                color = "green" if r > 0 else "red"
                lines.append(
                    f"  {json.dumps(features[i])} -- {json.dumps(features[j])} "
                    f"[color={color}, penwidth={width_scale * abs(r):.6g}, weight={abs(r):.6g}, "
                    f"label=\"{r:.3f}\"];"
                )
    lines.append("}")
    return "\n".join(lines) + "\n"
