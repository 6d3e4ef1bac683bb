import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_polytope(rng, m=10, d=3):
    """Random bounded polytope {Ax >= b} containing the origin strictly."""
    G = rng.standard_normal((m, d))
    A = np.vstack([G / np.linalg.norm(G, axis=1, keepdims=True), np.eye(d), -np.eye(d)])
    b = np.concatenate([-rng.uniform(0.5, 2.0, m), -2.0 * np.ones(2 * d)])
    return A, b


def random_pd(rng, d):
    G = rng.standard_normal((d, d))
    return G @ G.T / d + 0.5 * np.eye(d)


def fd_dir(fun, x, h, eps=1e-6):
    return (fun(x + eps * h) - fun(x - eps * h)) / (2 * eps)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
