"""Reverse-mode automatic differentiation over dense matrices and scalars.

A :class:`Tape` records :class:`Node` objects in creation order, which is
also a topological order because every node is built from already-existing
nodes.  :func:`backward` walks the tape in reverse and accumulates adjoints.

Values are numpy arrays (0-d for scalars).  Each primitive is a pair
``forward(*values, **attrs) -> (value, ctx)`` and
``vjp(g, ctx, needs) -> tuple of input adjoints``.

Example::

    tape = Tape()
    theta = tape.leaf(np.eye(3))
    loss = tape.record("trace-inner-product", tape.constant(S), theta)
    grads = backward(loss)      # grads[theta] == S.T
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import linalg
from .errors import NoConvergence, ShapeMismatch, UgladError


class Node:
    __slots__ = ("value", "grad", "parents", "ctx", "op", "requires_grad", "tape", "index")

    def __init__(self, tape, value, op, parents=(), ctx=None, requires_grad=False):
        self.tape = tape
        self.value = value
        self.op = op
        self.parents = parents
        self.ctx = ctx
        self.requires_grad = requires_grad
        self.grad = None
        self.index = len(tape.nodes)

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.shape})"

    def __add__(self, other):
        return self.tape.record("add", self, self.tape.wrap(other))

    def __sub__(self, other):
        return self.tape.record("subtract", self, self.tape.wrap(other))

    def __matmul__(self, other):
        return self.tape.record("matmul", self, self.tape.wrap(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.tape.record("scale", self, factor=float(other))
        other = self.tape.wrap(other)
        if other.value.ndim == 0 and self.value.ndim > 0:
            return self.tape.record("scalar-multiply", other, self)
        if self.value.ndim == 0 and other.value.ndim > 0:
            return self.tape.record("scalar-multiply", self, other)
        return self.tape.record("elementwise-multiply", self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return self.tape.record("scale", self, factor=-1.0)


class Tape:
    """Ordered record of nodes for one forward pass."""

    def __init__(self):
        self.nodes: list[Node] = []

    def _append(self, node):
        self.nodes.append(node)
        return node

    def leaf(self, value) -> Node:
        """A differentiable input (a parameter)."""
        return self._append(Node(self, np.array(value, dtype=np.float64), "leaf", requires_grad=True))

    def constant(self, value) -> Node:
        return self._append(Node(self, np.asarray(value, dtype=np.float64), "constant"))

    def wrap(self, x) -> Node:
        if isinstance(x, Node):
            if x.tape is not self:
                raise UgladError("node belongs to a different tape")
            return x
        return self.constant(x)

    def record(self, op: str, *inputs: Node, **attrs) -> Node:
        """Evaluate primitive ``op`` eagerly on ``inputs`` and append the result."""
        try:
            forward, _ = PRIMITIVES[op]
        except KeyError:
            raise UgladError(f"unknown primitive {op!r}") from None
        inputs = tuple(self.wrap(x) for x in inputs)
        value, ctx = forward(*(x.value for x in inputs), **attrs)
        needs = any(x.requires_grad for x in inputs)
        return self._append(Node(self, value, op, inputs, ctx if needs else None, needs))

    def __len__(self):
        return len(self.nodes)


def backward(loss: Node) -> dict:
    """Reverse sweep from a scalar ``loss``; returns ``{leaf: gradient}`` for every leaf.

    Leaves with no path to ``loss`` get an exact zero gradient.
    """
    if np.ndim(loss.value) != 0:
        raise ShapeMismatch("backward() needs a scalar loss")
    tape = loss.tape
    for node in tape.nodes:
        node.grad = None
    loss.grad = np.array(1.0)
    for node in reversed(tape.nodes[: loss.index + 1]):
        if node.grad is None or not node.parents or not node.requires_grad:
            continue
        _, vjp = PRIMITIVES[node.op]
        needs = tuple(p.requires_grad for p in node.parents)
        grads = vjp(node.grad, node.ctx, needs)
        for parent, g in zip(node.parents, grads):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
    out = {}
    for node in tape.nodes:
        if node.op == "leaf":
            out[node] = node.grad if node.grad is not None else np.zeros_like(node.value)
    return out


def _same_shape(a, b, op):
    if np.shape(a) != np.shape(b):
        raise ShapeMismatch(f"{op}: shapes {np.shape(a)} and {np.shape(b)} differ")


# ---------------------------------------------------------------- primitives


def _matmul_f(a, b):
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b, (a, b)


def _matmul_b(g, ctx, needs):
    a, b = ctx
    return (g @ b.T if needs[0] else None, a.T @ g if needs[1] else None)


def _add_f(a, b):
    _same_shape(a, b, "add")
    return a + b, None


def _sub_f(a, b):
    _same_shape(a, b, "subtract")
    return a - b, None


def _scalar_mul_f(s, a):
    if np.ndim(s) != 0:
        raise ShapeMismatch("scalar-multiply: first operand must be a scalar")
    return s * a, (s, a)


def _scalar_mul_b(g, ctx, needs):
    s, a = ctx
    return (np.sum(g * a) if needs[0] else None, s * g if needs[1] else None)


def _scale_f(a, factor):
    return factor * a, factor


def _emul_f(a, b):
    _same_shape(a, b, "elementwise-multiply")
    return a * b, (a, b)


def _tanh_f(a):
    y = np.tanh(a)
    return y, y


def _sigmoid_f(a):
    y = 0.5 * (1.0 + np.tanh(0.5 * a))
    return y, y


def _abs_smooth_f(a, eps=1e-12):
    y = np.sqrt(a * a + eps)
    return y, (a, y)


def _trace_inner_f(s, a):
    # tr(S A) = sum_ij S_ij A_ji
    if s.ndim != 2 or s.shape != a.T.shape:
        raise ShapeMismatch(f"trace-inner-product: shapes {s.shape} and {a.shape}")
    return np.sum(s * a.T), (s, a)


def _trace_inner_b(g, ctx, needs):
    s, a = ctx
    return (g * a.T if needs[0] else None, g * s.T if needs[1] else None)


def _logdet_f(a):
    L = linalg.cholesky(a)
    return np.array(2.0 * np.sum(np.log(np.diagonal(L)))), a


def _logdet_b(g, a, needs):
    return (g * linalg.spd_inverse(a),)


def _soft_threshold_f(x, tau):
    _same_shape(x, tau, "soft-threshold-smooth")
    active = np.abs(x) > tau
    sgn = np.sign(x)
    return np.where(active, sgn * (np.abs(x) - tau), 0.0), (active, sgn)


def _soft_threshold_b(g, ctx, needs):
    # on the kink |x| == tau the thresholded side (derivative 0) is used
    active, sgn = ctx
    ga = np.where(active, g, 0.0)
    return (ga if needs[0] else None, -sgn * ga if needs[1] else None)


def _sum_f(a):
    return np.sum(a), a.shape


def _frob_f(a):
    return np.sum(a * a), a


def _reciprocal_f(s, floor=0.0):
    if np.ndim(s) != 0:
        raise ShapeMismatch("reciprocal expects a scalar")
    clamped = s <= floor
    base = floor if clamped else s
    return np.array(1.0 / base), (base, clamped)


def _reciprocal_b(g, ctx, needs):
    base, clamped = ctx
    return (np.array(0.0) if clamped else -g / (base * base),)


def _affine_f(w, b, x):
    # channel-wise affine map: x has shape (C_in, ...), output (C_out, ...)
    if w.ndim != 2 or b.shape != (w.shape[0],) or x.shape[:1] != (w.shape[1],):
        raise ShapeMismatch(f"affine-map: W {w.shape}, b {b.shape}, x {x.shape}")
    x2 = x.reshape(x.shape[0], -1)
    out = w @ x2
    out += b[:, None]
    return out.reshape((w.shape[0],) + x.shape[1:]), (w, x2, x.shape)


def _affine_b(g, ctx, needs):
    w, x2, shape = ctx
    g2 = g.reshape(g.shape[0], -1)
    gw = g2 @ x2.T if needs[0] else None
    gb = g2.sum(axis=1) if needs[1] else None
    gx = (w.T @ g2).reshape(shape) if needs[2] else None
    return gw, gb, gx


def _stack_f(*xs):
    for x in xs[1:]:
        _same_shape(xs[0], x, "stack")
    return np.stack(xs), len(xs)


def _take_f(x, index):
    return x[index].copy(), (x.shape, index)


def _take_b(g, ctx, needs):
    shape, index = ctx
    out = np.zeros(shape)
    out[index] = g
    return (out,)


def _inverse_f(a):
    ai = linalg.spd_inverse(a)
    return ai, ai


def _sqrt_f(a):
    try:
        b, trace = linalg.newton_schulz_sqrt(a, keep=True)
        return b, ("ns", trace)
    except NoConvergence:
        b, w, V = linalg.eig_sqrt(a)
        return b, ("eig", (np.sqrt(w), V))


def _sqrt_b(g, ctx, needs):
    kind, data = ctx
    gs = linalg.symmetrize(g)
    if kind == "eig":
        # B dB + dB B = dA, solved in the eigenbasis of B
        s, V = data
        return (V @ ((V.T @ gs @ V) / (s[:, None] + s[None, :])) @ V.T,)
    # exact adjoint of the unrolled coupled iteration; the trace scale is a constant
    tr = data
    c = tr.scale
    gy = np.sqrt(c) * gs
    gz = np.zeros_like(gy)
    for k in range(len(tr.ts) - 1, -1, -1):
        y, z, t = tr.ys[k], tr.zs[k], tr.ts[k]
        gt = y.T @ gy + gz @ z.T
        gy = gy @ t.T
        gz = t.T @ gz
        gp = -0.5 * gt
        gz = gz + gp @ y.T
        gy = gy + z.T @ gp
    return (gy / c,)


PRIMITIVES: dict[str, tuple[Callable, Callable]] = {
    "matmul": (_matmul_f, _matmul_b),
    "add": (_add_f, lambda g, ctx, needs: (g, g)),
    "subtract": (_sub_f, lambda g, ctx, needs: (g, -g)),
    "scalar-multiply": (_scalar_mul_f, _scalar_mul_b),
    "scale": (_scale_f, lambda g, factor, needs: (factor * g,)),
    "elementwise-multiply": (_emul_f, lambda g, ctx, needs: (g * ctx[1], g * ctx[0])),
    "elementwise-tanh": (_tanh_f, lambda g, y, needs: (g * (1.0 - y * y),)),
    "elementwise-sigmoid": (_sigmoid_f, lambda g, y, needs: (g * y * (1.0 - y),)),
    "elementwise-abs-smooth": (_abs_smooth_f, lambda g, ctx, needs: (g * ctx[0] / ctx[1],)),
    "trace-inner-product": (_trace_inner_f, _trace_inner_b),
    "log-det-spd": (_logdet_f, _logdet_b),
    "soft-threshold-smooth": (_soft_threshold_f, _soft_threshold_b),
    "sum": (_sum_f, lambda g, shape, needs: (np.full(shape, g),)),
    "frobenius-norm-squared": (_frob_f, lambda g, a, needs: (2.0 * g * a,)),
    "reciprocal": (_reciprocal_f, _reciprocal_b),
    "affine-map": (_affine_f, _affine_b),
    "stack": (_stack_f, lambda g, n, needs: tuple(g[i] for i in range(n))),
    "take": (_take_f, _take_b),
    "spd-inverse": (_inverse_f, lambda g, ai, needs: (-(ai @ g @ ai),)),
    "matrix-sqrt-spd": (_sqrt_f, _sqrt_b),
}


def finite_difference_check(f, params: dict, h: float = 1e-5) -> float:
    """Worst relative discrepancy between :func:`backward` and central differences.

    ``f(tape, leaves)`` builds the loss on ``tape`` from ``leaves`` (a dict of
    leaf nodes keyed like ``params``) and returns the scalar loss node.  The
    relative error of each coordinate is ``|g - fd| / max(|g|, |fd|, floor)``
    with ``floor = 1e-3 * max |fd|``: central differences carry rounding
    noise of order ``eps * |f| / h``, so coordinates three orders of
    magnitude below the largest one are judged on that absolute scale.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}

    def value(p):
        tape = Tape()
        leaves = {k: tape.leaf(v) for k, v in p.items()}
        return float(f(tape, leaves).value)

    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    grads = backward(f(tape, leaves))
    analytic = {k: grads[leaves[k]] for k in params}

    fds = {}
    for k, v in params.items():
        fd = np.zeros_like(v)
        for idx in np.ndindex(v.shape):
            plus = {kk: vv.copy() for kk, vv in params.items()}
            minus = {kk: vv.copy() for kk, vv in params.items()}
            plus[k][idx] += h
            minus[k][idx] -= h
            fd[idx] = (value(plus) - value(minus)) / (2.0 * h)
        fds[k] = fd

    scale = max([0.0] + [float(np.max(np.abs(fd))) for fd in fds.values() if fd.size])
    floor = max(1e-3 * scale, 1e-12)
    worst = 0.0
    for k in params:
        g, fd = analytic[k], fds[k]
        if g.size == 0:
            continue
        denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)
        worst = max(worst, float(np.max(np.abs(g - fd) / denom)))
    return worst
