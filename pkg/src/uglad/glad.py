"""The GLAD recurrent cell, its unrolled forward pass and the unsupervised losses.

One cell step, for covariance ``S`` and state ``(theta, z, lam)``::

    Y      = S - lam * z
    theta' = (sqrt(Y Y + 4 lam I) - Y) / (2 lam)
    z'     = soft_threshold(theta', rho_nn(theta', S, z) / lam)        entrywise
    lam'   = lambda_nn(||z' - theta'||_F^2 / d^2, lam)

The theta update is the closed-form minimizer of the penalized likelihood in
theta for fixed ``z``, so theta stays SPD at every step.  ``rho_nn`` acts on
every matrix entry independently, which keeps the whole map equivariant under
simultaneous row/column permutations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .autodiff import Node, Tape
from .errors import InvalidArgument, LengthMismatch, ShapeMismatch

FORMAT_VERSION = "uglad-params/1"

RHO_SHAPES = [(3, 3), (3, 3), (3, 3), (1, 3)]
LAMBDA_SHAPES = [(3, 2), (1, 3)]
LAMBDA_FLOOR = 1e-6


def _layer_names(prefix, n):
    return [(f"{prefix}.W{i}", f"{prefix}.b{i}") for i in range(n)]


RHO_NAMES = _layer_names("rho", len(RHO_SHAPES))
LAMBDA_NAMES = _layer_names("lam", len(LAMBDA_SHAPES))


@dataclass
class GladParams:
    """Trainable parameters: two tiny MLPs and the initial offset ``t``.

    Stored flat in ``arrays`` under the names ``rho.W0 .. rho.b3``,
    ``lam.W0 .. lam.b1`` and ``t`` (0-d), the layout the optimizer sees.
    """

    arrays: dict = field(default_factory=dict)

    @classmethod
    def init(cls, seed=0, scale: float = 0.1, t: float = 1.0) -> "GladParams":
        rng = np.random.default_rng(seed)
        arrays = {}
        for names, shapes in ((RHO_NAMES, RHO_SHAPES), (LAMBDA_NAMES, LAMBDA_SHAPES)):
            for (wn, bn), shape in zip(names, shapes):
                arrays[wn] = rng.uniform(-scale, scale, size=shape)
                arrays[bn] = np.zeros(shape[0])
        arrays["t"] = np.array(float(t))
        return cls(arrays)

    def copy(self) -> "GladParams":
        return GladParams({k: v.copy() for k, v in self.arrays.items()})

    @property
    def t(self) -> float:
        return float(self.arrays["t"])

    def rho_layers(self):
        return [(self.arrays[w], self.arrays[b]) for w, b in RHO_NAMES]

    def lambda_layers(self):
        return [(self.arrays[w], self.arrays[b]) for w, b in LAMBDA_NAMES]

    def validate(self):
        for names, shapes in ((RHO_NAMES, RHO_SHAPES), (LAMBDA_NAMES, LAMBDA_SHAPES)):
            for (wn, bn), shape in zip(names, shapes):
                if self.arrays[wn].shape != shape or self.arrays[bn].shape != (shape[0],):
                    raise ShapeMismatch(f"layer {wn} must have shape {shape}")
        if not self.t > 0:
            raise InvalidArgument("offset t must be positive")

    def to_json(self) -> str:
        def layers(names):
            return [
                {"weight": self.arrays[w].tolist(), "bias": self.arrays[b].tolist()}
                for w, b in names
            ]

        doc = {
            "format_version": FORMAT_VERSION,
            "rho_nn": {"input_order": ["theta", "S", "z_prev"], "layers": layers(RHO_NAMES)},
            "lambda_nn": {"input_order": ["gap_sq_over_d2", "lambda"], "layers": layers(LAMBDA_NAMES)},
            "t": self.t,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "GladParams":
        doc = json.loads(text)
        if doc.get("format_version") != FORMAT_VERSION:
            raise InvalidArgument(f"unsupported parameter format {doc.get('format_version')!r}")
        arrays = {}
        for key, names in (("rho_nn", RHO_NAMES), ("lambda_nn", LAMBDA_NAMES)):
            layers = doc[key]["layers"]
            if len(layers) != len(names):
                raise ShapeMismatch(f"{key} must have {len(names)} layers")
            for (wn, bn), layer in zip(names, layers):
                arrays[wn] = np.array(layer["weight"], dtype=np.float64)
                arrays[bn] = np.array(layer["bias"], dtype=np.float64)
        arrays["t"] = np.array(float(doc["t"]))
        params = cls(arrays)
        params.validate()
        return params


@dataclass
class UnrollConfig:
    L: int = 30
    lambda_init: float = 1.0

    def __post_init__(self):
        if self.L < 1:
            raise InvalidArgument("unroll depth L must be at least 1")


@dataclass
class GladState:
    theta: object
    z: object
    lam: object
    iteration: int = 0

    def values(self) -> "GladState":
        """Plain-array copy of a state whose fields may be tape nodes."""
        get = lambda x: x.value if isinstance(x, Node) else x  # noqa: E731
        return GladState(np.array(get(self.theta)), np.array(get(self.z)), float(get(self.lam)), self.iteration)


# ---------------------------------------------------------------- plain numpy


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def mlp_forward(layers, x) -> float:
    """Evaluate an MLP (tanh hidden layers, sigmoid output) on one input vector."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape != (layers[0][0].shape[1],):
        raise ShapeMismatch(f"input of width {h.shape} does not match first layer {layers[0][0].shape}")
    for i, (w, b) in enumerate(layers):
        h = w @ h + b
        h = _sigmoid(h) if i == len(layers) - 1 else np.tanh(h)
    return float(h[0])


def soft_threshold(x, tau):
    """``sign(x) * max(|x| - tau, 0)``; works on scalars and arrays."""
    if np.any(np.asarray(tau) < 0):
        raise InvalidArgument("threshold must be non-negative")
    return np.sign(x) * np.maximum(np.abs(x) - tau, 0.0)


# ---------------------------------------------------------------- tape level


def mlp_apply(tape: Tape, layers, x: Node) -> Node:
    """Apply an MLP channel-wise: ``x`` has shape (C_in, ...), result (...)."""
    h = x
    for i, (w, b) in enumerate(layers):
        h = tape.record("affine-map", w, b, h)
        h = tape.record("elementwise-sigmoid" if i == len(layers) - 1 else "elementwise-tanh", h)
    return tape.record("take", h, index=0)


def _param_nodes(tape: Tape, params: GladParams, trainable: bool) -> dict:
    make = tape.leaf if trainable else tape.constant
    return {k: make(v) for k, v in params.arrays.items()}


def _layers(nodes, names):
    return [(nodes[w], nodes[b]) for w, b in names]


def theta_init(tape: Tape, S: Node, t: Node, lambda_init: float = 1.0) -> GladState:
    """``theta_0 = (S + t I)^-1``, ``z_0 = theta_0``, ``lam_0 = lambda_init``."""
    d = S.shape[0]
    shifted = tape.record("add", S, tape.record("scalar-multiply", t, tape.constant(np.eye(d))))
    theta = tape.record("spd-inverse", shifted)
    return GladState(theta, theta, tape.constant(lambda_init), 0)


def glad_cell(tape: Tape, S: Node, state: GladState, nodes: dict) -> GladState:
    d = S.shape[0]
    lam = state.lam
    inv_lam = tape.record("reciprocal", lam, floor=LAMBDA_FLOOR)

    y = tape.record("subtract", S, tape.record("scalar-multiply", lam, state.z))
    a = tape.record("add", tape.record("matmul", y, y),
                    tape.record("scalar-multiply", lam, tape.constant(4.0 * np.eye(d))))
    root = tape.record("matrix-sqrt-spd", a)
    half_inv = tape.record("scale", inv_lam, factor=0.5)
    theta = tape.record("scalar-multiply", half_inv, tape.record("subtract", root, y))

    feats = tape.record("stack", theta, S, state.z)
    rho = mlp_apply(tape, _layers(nodes, RHO_NAMES), feats)
    tau = tape.record("scalar-multiply", inv_lam, rho)
    z = tape.record("soft-threshold-smooth", theta, tau)

    gap = tape.record("scale", tape.record("frobenius-norm-squared", tape.record("subtract", z, theta)),
                      factor=1.0 / (d * d))
    lam_next = mlp_apply(tape, _layers(nodes, LAMBDA_NAMES), tape.record("stack", gap, lam))
    return GladState(theta, z, lam_next, state.iteration + 1)


def glad_forward(S, params: GladParams, cfg: UnrollConfig | None = None, tape: Tape | None = None,
                 nodes: dict | None = None, trajectory: bool = False):
    """Run ``theta_init`` followed by ``cfg.L`` cells.

    Without a ``tape`` the pass runs on a private tape with constant
    parameters and returns plain-array states.  With a ``tape`` the caller
    supplies ``nodes`` (usually leaves from :func:`param_leaves`) and receives
    node-valued states suitable for :func:`uglad.autodiff.backward`.

    Returns the final state, or ``(final, [state_0, ..., state_L])`` when
    ``trajectory`` is set.
    """
    cfg = cfg or UnrollConfig()
    own = tape is None
    if own:
        tape = Tape()
        nodes = _param_nodes(tape, params, trainable=False)
    elif nodes is None:
        nodes = _param_nodes(tape, params, trainable=True)
    S_node = S if isinstance(S, Node) else tape.constant(linalg.symmetrize(np.asarray(S, dtype=np.float64)))
    state = theta_init(tape, S_node, nodes["t"], cfg.lambda_init)
    states = [state] if trajectory else None
    for _ in range(cfg.L):
        state = glad_cell(tape, S_node, state, nodes)
        if trajectory:
            states.append(state)
    if own:
        state = state.values()
        states = [s.values() for s in states] if trajectory else None
    return (state, states) if trajectory else state


def param_leaves(tape: Tape, params: GladParams) -> dict:
    return _param_nodes(tape, params, trainable=True)


# ---------------------------------------------------------------- losses


def uglad_loss(S_eval, theta):
    """``-log det(theta) + <S_eval, theta>``.

    Returns a tape node when ``theta`` is a node, a float otherwise.
    """
    if isinstance(theta, Node):
        tape = theta.tape
        S_node = S_eval if isinstance(S_eval, Node) else tape.constant(S_eval)
        logdet = tape.record("log-det-spd", theta)
        inner = tape.record("trace-inner-product", S_node, theta)
        return tape.record("subtract", inner, logdet)
    theta = np.asarray(theta, dtype=np.float64)
    return float(np.sum(np.asarray(S_eval) * theta.T) - linalg.log_det_spd(theta))


def _mean(terms):
    if isinstance(terms[0], Node):
        tape = terms[0].tape
        total = terms[0]
        for term in terms[1:]:
            total = tape.record("add", total, term)
        return tape.record("scale", total, factor=1.0 / len(terms))
    return float(sum(terms) / len(terms))


def multitask_loss(covariances, thetas):
    """Mean of per-task losses ``uglad_loss(S_k, theta_k)``."""
    if len(covariances) != len(thetas) or not thetas:
        raise LengthMismatch(f"{len(covariances)} covariances for {len(thetas)} precisions")
    return _mean([uglad_loss(S, th) for S, th in zip(covariances, thetas)])


def meta_loss(S_full, thetas):
    """Mean over batches of ``uglad_loss(S_full, theta_k)`` against one full-data covariance."""
    if not thetas:
        raise LengthMismatch("meta_loss needs at least one precision matrix")
    d = np.shape(S_full.value if isinstance(S_full, Node) else S_full)[0]
    for th in thetas:
        if np.shape(th.value if isinstance(th, Node) else th) != (d, d):
            raise LengthMismatch("precision dimension does not match the full covariance")
    return _mean([uglad_loss(S_full, th) for th in thetas])
