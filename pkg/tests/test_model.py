import math

import numpy as np
import pytest
from scipy import integrate

from dikin.errors import DimensionError, ShapeError, UnsupportedTerm
from dikin.model import (
    Ellipsoid,
    EntropyPotential,
    ExpPotential,
    Linear,
    LinearPotential,
    LogDetPotential,
    NormPotential,
    PowerPotential,
    ProblemSpec,
    PSDCone,
    QuadraticPotential,
    augment,
    project_sample,
    reduce,
)
from dikin.psd import TruncatedPSDBarrier


def _box(d, lo=-1.0, hi=1.0):
    return Linear(np.vstack([np.eye(d), -np.eye(d)]), np.concatenate([lo * np.ones(d), -hi * np.ones(d)]))


def test_uniform_polytope():
    red = reduce(ProblemSpec(3, [_box(3)]))
    assert red.dim == 3 and red.n_epigraph == 0
    assert not np.any(red.c)
    assert len(red.parts) == 1 and red.parts[0][0].name == "log"
    x = np.array([0.1, 0.2, -0.3])
    np.testing.assert_array_equal(project_sample(red, x), x)


def test_quadratic_potential_on_polytope():
    d = 3
    spec = ProblemSpec(d, [_box(d)], [QuadraticPotential(np.eye(d), np.zeros(d))])
    red = reduce(spec)
    assert red.dim == d + 1
    np.testing.assert_array_equal(red.c, np.eye(d + 1)[d])
    assert [p.name for p, _ in red.parts] == ["log", "gaussian"]
    assert red.composite.k == 2


def test_entropy_potential_doubles_dimension():
    d = 3
    red = reduce(ProblemSpec(d, [_box(d, 0.0, 1.0)], [EntropyPotential()]))
    assert red.dim == 2 * d and red.n_epigraph == d
    np.testing.assert_array_equal(red.c, np.r_[np.zeros(d), np.ones(d)])


def test_layout_follows_declaration_order():
    d = 2
    spec = ProblemSpec(d, [_box(d, 0.1, 1.0)],
                       [ExpPotential(index=(1,)), NormPotential(np.eye(d), np.zeros(d)),
                        LinearPotential(np.array([1.0, -2.0]))])
    red = reduce(spec)
    assert red.dim == d + 2
    np.testing.assert_array_equal(red.c, [1.0, -2.0, 1.0, 1.0])
    (_, xi0, ti0), (_, xi1, ti1) = red.epigraphs
    np.testing.assert_array_equal(xi0, [1])
    np.testing.assert_array_equal(ti0, [2])
    np.testing.assert_array_equal(ti1, [3])
    assert [p.name for p, _ in red.parts] == ["log", "exp-epigraph", "soc"]


def test_project_augment_round_trip(rng):
    d = 2
    spec = ProblemSpec(d, [_box(d, 0.1, 1.0)],
                       [EntropyPotential(), PowerPotential(3.0), QuadraticPotential(np.eye(d), np.zeros(d))])
    red = reduce(spec)
    for _ in range(20):
        x = rng.uniform(0.15, 0.95, d)
        y = augment(red, x)
        np.testing.assert_array_equal(project_sample(red, y), x)
        assert red.composite.in_domain(y)
        # below the epigraph the lifted point is infeasible
        y_bad = y.copy()
        y_bad[d] = x[0] * math.log(x[0]) - 0.1
        assert not red.composite.in_domain(y_bad)
    with pytest.raises(DimensionError):
        project_sample(red, np.zeros(3))
    with pytest.raises(DimensionError):
        augment(red, np.zeros(3))


def test_marginal_identity_by_quadrature():
    """The x-marginal of exp(-t) on the reduced body equals exp(-f(x))."""
    spec = ProblemSpec(1, [_box(1, -1.0, 2.0)], [QuadraticPotential(np.array([[1.5]]), np.array([0.3]))])
    red = reduce(spec)
    comp = red.composite

    def dens(t, x):
        y = np.array([x, t])
        return math.exp(-red.f(y)) if comp.in_domain(y) else 0.0

    for x in np.linspace(-0.9, 1.9, 9):
        fx = spec.potential(np.array([x]))
        val, _ = integrate.quad(dens, fx - 1.0, fx + 60.0, args=(x,), points=[fx], epsabs=1e-12, limit=200)
        assert val == pytest.approx(math.exp(-fx), abs=1e-6)


def test_reduce_twice_rejected():
    red = reduce(ProblemSpec(2, [_box(2)]))
    with pytest.raises(UnsupportedTerm):
        reduce(red)


def test_reduce_deterministic():
    spec = ProblemSpec(2, [_box(2)], [QuadraticPotential(np.eye(2), np.zeros(2))])
    assert reduce(spec).describe() == reduce(spec).describe()


def test_spec_validation():
    with pytest.raises(ShapeError):
        Linear(np.array([[1.0, 0.0], [0.0, 0.0]]), np.zeros(2))
    with pytest.raises(DimensionError):
        ProblemSpec(3, [_box(2)])
    with pytest.raises(UnsupportedTerm):
        ProblemSpec(2, ["not a constraint"])
    with pytest.raises(UnsupportedTerm):
        reduce(ProblemSpec(2, []))
    with pytest.raises(UnsupportedTerm):
        Linear(np.eye(2), np.zeros(2), metric="bogus")


def test_ellipsoid_and_log_density():
    spec = ProblemSpec(2, [Ellipsoid(2 * np.eye(2), np.zeros(2), -1.0)], [LinearPotential(np.array([1.0, 0.0]))])
    assert spec.log_density(np.array([0.5, 0.0])) == pytest.approx(-0.5)
    assert spec.log_density(np.array([1.5, 0.0])) == -math.inf
    red = reduce(spec)
    assert [p.name for p, _ in red.parts] == ["ellipsoid"]


def test_psd_fast_path_and_residual_logdet():
    cone = PSDCone(2)
    trace = Linear(np.array([[-1.0, 0.0, -1.0]]), np.array([-1.0]))
    spec = ProblemSpec(3, [cone, trace])
    red = reduce(spec)
    assert isinstance(red.parts[0][0], TruncatedPSDBarrier)
    slow = reduce(spec, psd_fast_path=False)
    y = np.array([0.3, 0.05, 0.4])
    np.testing.assert_allclose(red.composite.metric(y), slow.composite.metric(y), rtol=1e-12)
    # with a log-det potential the cone stays a separate part and -log det becomes a residual
    spec2 = ProblemSpec(3, [cone, trace], [LogDetPotential(2)])
    red2 = reduce(spec2)
    assert len(red2.residuals) == 1 and red2.beta_f > 0
    X = cone.matrix(y)
    assert red2.f(y) == pytest.approx(-math.log(np.linalg.det(X)))
    assert np.all(np.linalg.eigvalsh(red2.f_hessian(y)) >= -1e-12)
