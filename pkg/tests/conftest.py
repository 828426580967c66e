import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def random_spd(d, rng, cond=None):
    """SPD matrix; with ``cond`` the eigenvalues are log-spaced to that condition number."""
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if cond is None:
        w = rng.uniform(0.5, 3.0, d)
    else:
        w = np.geomspace(1.0, cond, d) * rng.uniform(0.5, 2.0)
    a = (q * w) @ q.T
    return 0.5 * (a + a.T)


def random_cov(d, m, rng):
    x = rng.standard_normal((m, d)) @ rng.standard_normal((d, d))
    x -= x.mean(axis=0)
    s = x.T @ x / m
    return 0.5 * (s + s.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    acceptance = __import__("sys").modules.get("test_acceptance")
    lines = getattr(acceptance, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
