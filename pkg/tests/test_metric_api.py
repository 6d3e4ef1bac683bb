import math

import numpy as np
import pytest

from dikin.errors import FactorizationError, MissingParameter
from dikin.linear import LogBarrier
from dikin.metric import DikinEllipsoid, SymPD, combined_amenability, in_dikin, local_norm, symmetry_fallback
from dikin.structured import soc_barrier

from conftest import random_pd, random_polytope


def test_local_norm_examples(rng):
    assert local_norm(np.eye(2), np.array([3.0, 4.0])) == pytest.approx(5.0, abs=1e-15)
    assert local_norm(np.diag([4.0, 9.0]), np.ones(2)) == pytest.approx(math.sqrt(13.0), abs=1e-15)
    G = random_pd(rng, 5)
    v = rng.standard_normal(5)
    brute = math.sqrt(sum(v[i] * G[i, j] * v[j] for i in range(5) for j in range(5)))
    assert abs(local_norm(G, v) - brute) <= 1e-12 * brute


def test_local_norm_rejects_non_pd():
    with pytest.raises(FactorizationError):
        local_norm(np.diag([1.0, -1.0]), np.ones(2))


def test_sympd_caches_and_checks(rng):
    G = random_pd(rng, 4)
    g = SymPD(G)
    assert g.logdet == pytest.approx(np.linalg.slogdet(G)[1], rel=1e-12)
    v = rng.standard_normal(4)
    np.testing.assert_allclose(G @ g.solve(v), v, atol=1e-12)
    with pytest.raises(FactorizationError):
        SymPD(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_in_dikin_examples(rng):
    e = DikinEllipsoid(np.zeros(2), SymPD(np.eye(2)), 1.0)
    assert in_dikin(e, np.zeros(2))
    assert not in_dikin(e, np.array([2.0, 0.0]))


def test_unit_dikin_inside_body(rng):
    A, b = random_polytope(rng)
    bar = LogBarrier(A, b)
    x = np.zeros(3)
    g = bar.local(x)
    for _ in range(200):
        u = g.draw(rng)
        y = x + 0.999999 * u / math.sqrt(g.quad(u))
        assert math.isfinite(bar.value(y))


def test_combined_amenability_examples(rng):
    A, b = random_polytope(rng, m=5, d=2)
    log = LogBarrier(A, b)
    assert combined_amenability([log]) == (log.m, log.m)
    k = 3
    nu, nub = combined_amenability([log] * k)
    assert (nu, nub) == (k * k * log.m, k * k * log.m)
    soc = soc_barrier(np.eye(2), np.zeros(2))
    nu2, nub2 = combined_amenability([log, soc])
    assert nu2 == 2 * (log.m + soc.nu)
    assert soc.nu == pytest.approx(2 * 3)  # parameter 2, scaled by the domain dimension

    class Bare:
        name = "bare"
        nu = None
        nu_bar = 1.0

    with pytest.raises(MissingParameter):
        combined_amenability([log, Bare()])


def test_symmetry_fallback_constant():
    assert symmetry_fallback(4.0) == (4.0 + 2.0 * 2.0) ** 2


def test_with_scaling_is_a_copy(rng):
    A, b = random_polytope(rng)
    bar = LogBarrier(A, b)
    s = bar.with_scaling(3.0)
    x = np.zeros(3)
    np.testing.assert_allclose(s.metric(x), 3.0 * bar.metric(x), rtol=1e-14)
    assert bar.scaling == 1.0 and s.nu == 3.0 * bar.nu
