import math

import numpy as np
import pytest
from scipy import integrate

from dikin.diagnostics import mcse_mean
from dikin.errors import NotInterior
from dikin.linear import LogBarrier
from dikin.walk import (
    R0,
    WalkConfig,
    acceptance_ratio,
    default_radius,
    init_state,
    propose,
    run,
    step,
    transition_log_density,
)

from conftest import random_polytope


def _box(d=2):
    return LogBarrier(np.vstack([np.eye(d), -np.eye(d)]), -np.ones(2 * d))


def _zero(x):
    return 0.0


def test_default_radius():
    assert default_radius(0.0) == R0 == 0.3
    assert default_radius(4.0) == pytest.approx(R0 / 2)
    assert default_radius(1.0) == R0
    with pytest.raises(ValueError):
        default_radius(-1.0)


def test_config_guards():
    with pytest.raises(ValueError):
        WalkConfig(r=1.5)
    WalkConfig(r=1.5, allow_large_r=True)
    with pytest.raises(ValueError):
        WalkConfig(laziness=1.5)
    with pytest.raises(ValueError):
        WalkConfig(n_steps=0)


def test_init_requires_interior():
    with pytest.raises(NotInterior):
        init_state(np.array([2.0, 0.0]), _zero, _box())


def test_small_radius_proposal_stays_put(rng):
    st = init_state(np.array([0.3, -0.1]), _zero, _box(), rng)
    z = propose(st, 1e-12)
    np.testing.assert_allclose(z, st.x, atol=1e-10)


def test_proposal_covariance(rng):
    g = _box()
    x = np.array([0.4, -0.6])
    st = init_state(x, _zero, g, rng)
    r = 0.5
    N = 100_000
    Z = np.array([propose(st, r) for _ in range(N)]) - x
    cov = (r * r / 2) * np.linalg.inv(g.metric(x))
    emp = Z.T @ Z / N
    se = np.sqrt((cov**2 + np.outer(np.diag(cov), np.diag(cov))) / N)
    assert np.all(np.abs(emp - cov) <= 5 * se)


def test_affine_invariance(rng):
    A, b = random_polytope(rng)
    T = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    Ti = np.linalg.inv(T)
    g1, g2 = LogBarrier(A, b), LogBarrier(A @ T, b)
    pot = lambda x: 0.5 * x @ x
    pot2 = lambda x: pot(T @ x)
    for _ in range(20):
        x = rng.uniform(-0.2, 0.2, 3)
        z = x + 0.1 * rng.standard_normal(3)
        # proposal covariance transported back by T agrees
        c1 = np.linalg.inv(g1.metric(x))
        c2 = T @ np.linalg.inv(g2.metric(Ti @ x)) @ T.T
        np.testing.assert_allclose(c1, c2, rtol=1e-9, atol=1e-12)
        a1 = acceptance_ratio(init_state(x, pot, g1, 0), z, 0.5)
        a2 = acceptance_ratio(init_state(Ti @ x, pot2, g2, 0), Ti @ z, 0.5)
        assert a1 == pytest.approx(a2, rel=1e-10, abs=1e-12)


def test_acceptance_ratio_examples():
    g = _box()
    st = init_state(np.array([0.3, -0.2]), _zero, g, 0)
    assert acceptance_ratio(st, st.x.copy(), 0.5) == 1.0
    assert acceptance_ratio(st, np.array([-0.3, 0.2]), 0.5) == pytest.approx(1.0)
    assert acceptance_ratio(st, np.array([1.5, 0.0]), 0.5) == 0.0


def test_detailed_balance(rng):
    A, b = random_polytope(rng)
    g = LogBarrier(A, b)
    pot = lambda x: float(np.array([1.0, -0.5, 2.0]) @ x)
    for _ in range(50):
        x = rng.uniform(-0.2, 0.2, 3)
        z = x + 0.05 * rng.standard_normal(3)
        if not g.in_domain(z):
            continue
        lhs = transition_log_density(g, pot, x, z, 0.4) - pot(x)
        rhs = transition_log_density(g, pot, z, x, 0.4) - pot(z)
        assert abs(math.expm1(lhs - rhs)) <= 1e-10


def test_lazy_one_never_moves(rng):
    cfg = WalkConfig(laziness=1.0, n_steps=200)
    x0 = np.array([0.1, 0.2])
    out, st = run(x0, _zero, _box(), cfg, rng=rng)
    assert np.all(out == x0) and st.n_proposed == 0


def test_counter_tracks_moves(rng):
    st = init_state(np.array([0.1, 0.2]), _zero, _box(), rng)
    cfg = WalkConfig(r=0.9, laziness=0.5)
    for _ in range(500):
        before, acc = st.x.copy(), st.n_accepted
        step(st, cfg)
        assert (st.n_accepted == acc + 1) == (not np.array_equal(st.x, before))


def test_single_step_run_equals_step():
    cfg = WalkConfig(n_steps=1, laziness=0.0, r=0.5)
    out, _ = run(np.array([0.1, 0.2]), _zero, _box(), cfg, rng=np.random.default_rng(7))
    st = init_state(np.array([0.1, 0.2]), _zero, _box(), np.random.default_rng(7))
    step(st, cfg)
    np.testing.assert_array_equal(out[0], st.x)


def test_determinism():
    cfg = WalkConfig(n_steps=300, seed=11)
    a, _ = run(np.zeros(2), _zero, _box(), cfg)
    b, _ = run(np.zeros(2), _zero, _box(), cfg)
    np.testing.assert_array_equal(a, b)


def test_acceptance_band(rng):
    cfg = WalkConfig(r=0.5, laziness=0.0, n_steps=5000)
    _, st = run(np.zeros(2), _zero, _box(), cfg, rng=rng)
    assert 0.1 < st.acceptance_rate < 0.9


def test_feasibility_along_trajectory(rng):
    A, b = random_polytope(rng)
    g = LogBarrier(A, b)
    seen = []
    run(np.zeros(3), _zero, g, WalkConfig(n_steps=2000, laziness=0.0),
        rng=rng, callback=lambda i, s: seen.append(np.isfinite(g.value(s.x))))
    assert all(seen) and len(seen) == 2000


def test_triangle_centroid(rng):
    tri = LogBarrier(np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]), np.array([0.0, 0.0, -1.0]))
    cfg = WalkConfig(n_steps=100_000, laziness=0.5)
    out, _ = run(np.array([0.2, 0.2]), _zero, tri, cfg, rng=rng)
    out = out[5000:]
    for j in range(2):
        se = mcse_mean(out[:, j])
        assert abs(out[:, j].mean() - 1 / 3) <= 3 * se


def test_one_step_tv_proxy():
    """TV between the non-lazy kernels at x and at y with ||x - y||_x = r0/sqrt(d) stays below 0.99."""
    g = LogBarrier(np.array([[1.0], [-1.0]]), np.array([0.0, -1.0]))
    r = R0

    def kernel(x):
        def dens(z):
            if not 0 < z < 1:
                return 0.0
            return math.exp(transition_log_density(g, _zero, np.array([x]), np.array([z]), r))
        move, _ = integrate.quad(dens, 0, 1, points=[x], limit=200, epsabs=1e-7)
        return dens, 1.0 - move

    worst = 0.0
    for x in [0.02, 0.1, 0.3, 0.5, 0.8, 0.97]:
        h = r / math.sqrt(g.metric(np.array([x]))[0, 0])
        for y in (x - h, x + h):
            if not 0 < y < 1:
                continue
            px, rx = kernel(x)
            py, ry = kernel(y)
            diff, _ = integrate.quad(lambda z: abs(px(z) - py(z)), 0, 1, points=sorted([x, y]), limit=400,
                                     epsabs=1e-6)
            tv = 0.5 * (rx + ry + diff)
            worst = max(worst, tv)
    assert worst <= 0.99
