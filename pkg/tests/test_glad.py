import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_cov, random_spd
from uglad import glad, linalg
from uglad.autodiff import Tape, backward
from uglad.errors import InvalidArgument, LengthMismatch, ShapeMismatch


def pinned_params(seed=0):
    """Parameters whose networks output exactly rho = 0 and lambda = 1."""
    p = glad.GladParams.init(seed)
    p.arrays["rho.W3"][:] = 0.0
    p.arrays["rho.b3"][:] = -1000.0
    p.arrays["lam.W1"][:] = 0.0
    p.arrays["lam.b1"][:] = 1000.0
    return p


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


# ---------------------------------------------------------------- params


def test_init_layout():
    p = glad.GladParams.init(seed=3)
    p.validate()
    assert [p.arrays[w].shape for w, _ in glad.RHO_NAMES] == [(3, 3), (3, 3), (3, 3), (1, 3)]
    assert [p.arrays[w].shape for w, _ in glad.LAMBDA_NAMES] == [(3, 2), (1, 3)]
    for w, b in glad.RHO_NAMES + glad.LAMBDA_NAMES:
        assert np.all(np.abs(p.arrays[w]) <= 0.1)
        assert np.array_equal(p.arrays[b], np.zeros_like(p.arrays[b]))
    assert p.t == 1.0


def test_params_json_round_trip():
    p = glad.GladParams.init(seed=5, t=0.7)
    q = glad.GladParams.from_json(p.to_json())
    assert set(q.arrays) == set(p.arrays)
    for k in p.arrays:
        assert np.array_equal(p.arrays[k], q.arrays[k])


def test_params_json_rejects_bad_documents():
    p = glad.GladParams.init()
    bad = p.to_json().replace(glad.FORMAT_VERSION, "other/9")
    with pytest.raises(InvalidArgument):
        glad.GladParams.from_json(bad)
    p.arrays["rho.W0"] = np.zeros((2, 3))
    with pytest.raises(ShapeMismatch):
        glad.GladParams.from_json(p.to_json())


# ---------------------------------------------------------------- mlp and threshold


def test_mlp_forward_examples(rng):
    zero = [(np.zeros(s), np.zeros(s[0])) for s in glad.RHO_SHAPES]
    assert glad.mlp_forward(zero, rng.standard_normal(3)) == 0.5
    zero[-1] = (np.zeros((1, 3)), np.array([1.3]))
    assert glad.mlp_forward(zero, rng.standard_normal(3)) == pytest.approx(sigmoid(1.3), abs=1e-15)
    with pytest.raises(ShapeMismatch):
        glad.mlp_forward(zero, np.zeros(2))


def test_mlp_forward_matches_hand_rolled(rng):
    layers = [(rng.standard_normal(s), rng.standard_normal(s[0])) for s in glad.RHO_SHAPES]
    x = rng.standard_normal(3)
    h1 = np.tanh(layers[0][0] @ x + layers[0][1])
    h2 = np.tanh(layers[1][0] @ h1 + layers[1][1])
    h3 = np.tanh(layers[2][0] @ h2 + layers[2][1])
    out = sigmoid(layers[3][0] @ h3 + layers[3][1])[0]
    assert glad.mlp_forward(layers, x) == pytest.approx(out, abs=1e-12)


def test_mlp_apply_matches_mlp_forward(rng):
    layers = [(rng.standard_normal(s), rng.standard_normal(s[0])) for s in glad.LAMBDA_SHAPES]
    x = rng.standard_normal((2, 4, 4))
    tape = Tape()
    out = glad.mlp_apply(tape, [(tape.constant(w), tape.constant(b)) for w, b in layers], tape.constant(x))
    expected = np.array([[glad.mlp_forward(layers, x[:, i, j]) for j in range(4)] for i in range(4)])
    assert np.allclose(out.value, expected, atol=1e-14)


def test_soft_threshold_examples():
    assert glad.soft_threshold(1.2, 0.5) == pytest.approx(0.7)
    assert glad.soft_threshold(0.3, 0.5) == 0.0
    assert glad.soft_threshold(-1.0, 0.2) == pytest.approx(-0.8)
    with pytest.raises(InvalidArgument):
        glad.soft_threshold(1.0, -0.1)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.floats(0, 2), st.floats(0, 2))
def test_raising_threshold_never_removes_zeros(xs, tau, extra):
    x = np.array(xs)
    assert np.sum(glad.soft_threshold(x, tau + extra) == 0) >= np.sum(glad.soft_threshold(x, tau) == 0)


# ---------------------------------------------------------------- cell


def _state(tape, theta, z, lam):
    return glad.GladState(tape.constant(theta), tape.constant(z), tape.constant(lam), 0)


def test_theta_init_examples(rng):
    tape = Tape()
    one = tape.constant(1.0)
    assert np.allclose(glad.theta_init(tape, tape.constant(np.eye(3)), one).theta.value, 0.5 * np.eye(3))
    st0 = glad.theta_init(tape, tape.constant(np.diag([0.0, 2.0])), one)
    assert np.allclose(st0.theta.value, np.diag([1.0, 1.0 / 3.0]))
    assert st0.z is st0.theta and float(st0.lam.value) == 1.0
    S = random_cov(10, 30, rng)
    theta0 = glad.theta_init(tape, tape.constant(S), one).theta.value
    assert np.linalg.norm((S + np.eye(10)) @ theta0 - np.eye(10)) < 1e-9


def test_cell_scalar_case():
    p = pinned_params()
    tape = Tape()
    nodes = {k: tape.constant(v) for k, v in p.arrays.items()}
    out = glad.glad_cell(tape, tape.constant([[2.0]]), _state(tape, [[1.0]], [[0.5]], 1.0), nodes)
    theta = float(out.theta.value[0, 0])
    assert theta == pytest.approx(0.5, abs=1e-12)
    assert -1.0 / theta + 2.0 + 1.0 * (theta - 0.5) == pytest.approx(0.0, abs=1e-12)


def test_cell_identity_case():
    p = pinned_params()
    tape = Tape()
    nodes = {k: tape.constant(v) for k, v in p.arrays.items()}
    out = glad.glad_cell(tape, tape.constant(np.eye(4)), _state(tape, 0.5 * np.eye(4), 0.5 * np.eye(4), 1.0), nodes)
    expected = (-0.5 + np.sqrt(0.25 + 4.0)) / 2.0
    assert np.allclose(out.theta.value, expected * np.eye(4), atol=1e-12)
    assert expected == pytest.approx(0.78078, abs=1e-5)


def test_theta_step_gradient(rng):
    d, lam = 8, 0.7
    W = rng.standard_normal((d, d))

    def step(y):
        tape = Tape()
        yl = tape.leaf(y)
        a = tape.record("add", tape.record("matmul", yl, yl), tape.constant(4.0 * lam * np.eye(d)))
        theta = tape.record("scale", tape.record("subtract", tape.record("matrix-sqrt-spd", a), yl), factor=0.5 / lam)
        return tape.record("trace-inner-product", tape.constant(W), theta), yl

    y = rng.standard_normal((d, d))
    y = y + y.T
    loss, leaf = step(y)
    g = backward(loss)[leaf]
    for _ in range(5):
        e = rng.standard_normal((d, d))
        e = e + e.T
        h = 1e-5
        fd = (float(step(y + h * e)[0].value) - float(step(y - h * e)[0].value)) / (2 * h)
        assert abs(np.sum(g * e) - fd) / abs(fd) < 1e-4


# ---------------------------------------------------------------- forward


def test_unroll_config_rejects_zero_depth():
    with pytest.raises(InvalidArgument):
        glad.UnrollConfig(L=0)


def test_one_step_is_init_then_cell(rng):
    S = random_cov(5, 20, rng)
    p = glad.GladParams.init(seed=2)
    final = glad.glad_forward(S, p, glad.UnrollConfig(L=1))
    tape = Tape()
    nodes = {k: tape.constant(v) for k, v in p.arrays.items()}
    S_node = tape.constant(S)
    manual = glad.glad_cell(tape, S_node, glad.theta_init(tape, S_node, nodes["t"]), nodes)
    assert np.array_equal(final.theta, manual.theta.value)
    assert final.iteration == 1


def test_trajectory_is_spd_and_lambda_in_range(rng):
    S = random_cov(6, 10, rng)
    final, states = glad.glad_forward(S, glad.GladParams.init(seed=1, scale=2.0), glad.UnrollConfig(L=12), trajectory=True)
    assert len(states) == 13 and states[-1].iteration == final.iteration == 12
    for k, s in enumerate(states):
        assert linalg.is_spd(s.theta)
        assert np.allclose(s.z, s.z.T, atol=1e-12)
        if k:
            assert 0.0 < s.lam < 1.0


def test_spd_at_every_step_many_draws():
    rng = np.random.default_rng(11)
    failures = 0
    for i in range(100):
        d = int(rng.integers(3, 26))
        S = random_cov(d, int(rng.integers(2, 3 * d)), rng)  # often singular
        p = glad.GladParams.init(seed=i, scale=float(rng.uniform(0.05, 3.0)), t=float(rng.uniform(0.1, 3.0)))
        _, states = glad.glad_forward(S, p, glad.UnrollConfig(L=30), trajectory=True)
        failures += sum(not linalg.is_spd(s.theta) for s in states)
    assert failures == 0


def test_permutation_equivariance_fifty_pairs():
    rng = np.random.default_rng(21)
    worst = 0.0
    for i in range(50):
        d = int(rng.integers(3, 15))
        S = random_cov(d, 2 * d, rng)
        perm = rng.permutation(d)
        P = np.eye(d)[perm]
        p = glad.GladParams.init(seed=i, scale=0.5)
        a = glad.glad_forward(S, p).theta
        b = glad.glad_forward(P @ S @ P.T, p).theta
        worst = max(worst, np.max(np.abs(P @ a @ P.T - b)))
    assert worst < 1e-9


def test_fixed_point_oracle_twenty_instances():
    rng = np.random.default_rng(31)
    p = pinned_params()
    cfg = glad.UnrollConfig(L=200)
    for _ in range(20):
        S = random_spd(10, rng, cond=10.0)
        theta = glad.glad_forward(S, p, cfg).theta
        inv = np.linalg.inv(S)
        assert np.linalg.norm(theta - inv) / np.linalg.norm(inv) < 1e-3


# ---------------------------------------------------------------- losses


def test_uglad_loss_examples(rng):
    assert glad.uglad_loss(np.eye(3), np.eye(3)) == pytest.approx(3.0)
    assert glad.uglad_loss(np.eye(2), 2.0 * np.eye(2)) == pytest.approx(4.0 - np.log(4.0))
    S = random_spd(5, rng)
    assert glad.uglad_loss(S, np.linalg.inv(S)) == pytest.approx(np.linalg.slogdet(S)[1] + 5.0, abs=1e-10)


def test_uglad_loss_node_matches_value(rng):
    S, theta = random_cov(4, 10, rng), random_spd(4, rng)
    tape = Tape()
    assert float(glad.uglad_loss(S, tape.leaf(theta)).value) == pytest.approx(glad.uglad_loss(S, theta), abs=1e-12)


def test_multitask_and_meta_losses(rng):
    Ss = [random_cov(4, 10, rng) for _ in range(4)]
    thetas = [random_spd(4, rng) for _ in range(4)]
    assert glad.multitask_loss(Ss[:1], thetas[:1]) == glad.uglad_loss(Ss[0], thetas[0])
    assert glad.multitask_loss([Ss[0]] * 2, [thetas[0]] * 2) == pytest.approx(glad.uglad_loss(Ss[0], thetas[0]))
    mean = sum(glad.uglad_loss(S, t) for S, t in zip(Ss[:3], thetas[:3])) / 3
    assert glad.multitask_loss(Ss[:3], thetas[:3]) == pytest.approx(mean, abs=1e-12)
    assert glad.meta_loss(Ss[0], thetas[:1]) == glad.uglad_loss(Ss[0], thetas[0])
    assert glad.meta_loss(Ss[0], [thetas[1]] * 3) == pytest.approx(glad.uglad_loss(Ss[0], thetas[1]))
    mean = sum(glad.uglad_loss(Ss[0], t) for t in thetas) / 4
    assert glad.meta_loss(Ss[0], thetas) == pytest.approx(mean, abs=1e-12)
    with pytest.raises(LengthMismatch):
        glad.multitask_loss(Ss[:2], thetas[:3])
    with pytest.raises(LengthMismatch):
        glad.meta_loss(Ss[0], [])
