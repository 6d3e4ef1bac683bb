import math

import numpy as np
import pytest

from dikin.errors import FactorizationError
from dikin.psd import (
    PSDBarrier,
    PsdMetricState,
    SvecCodec,
    TruncatedPSDBarrier,
    det_ratio,
    goe_variance_check,
    logdet_barrier_value,
    metric_inverse_apply,
    psd_hessian,
    psd_hessian_inverse,
    psd_hessian_logdet,
    psd_inverse_apply,
    sample_metric_gaussian,
    truncated_psd_metric,
)

from conftest import fd_dir, random_pd


def _sym(rng, n):
    G = rng.standard_normal((n, n))
    return 0.5 * (G + G.T)


def _constraints(rng, n, m, X):
    """m random constraints <A_i, X> >= b_i with slack in [0.2, 1] at X."""
    out = []
    for _ in range(m):
        A = _sym(rng, n)
        out.append((A, float(np.sum(A * X)) - rng.uniform(0.2, 1.0)))
    return out


def test_logdet_value_examples():
    assert logdet_barrier_value(np.eye(3)) == 0.0
    assert logdet_barrier_value(np.diag([2.0, 0.5])) == pytest.approx(0.0, abs=1e-15)
    assert logdet_barrier_value(np.diag([1.0, -1.0])) == math.inf


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_codec_identities(n, rng):
    c = SvecCodec(n)
    assert c.ds == n * (n + 1) // 2
    H = _sym(rng, n)
    v = c.svec(H)
    np.testing.assert_array_equal(c.mat(v), H)
    np.testing.assert_array_equal(c.svec(c.mat(v)), v)
    np.testing.assert_array_equal(c.M @ v, c.vec(H))
    np.testing.assert_array_equal(c.L @ c.vec(H), v)
    Nm = c.N
    np.testing.assert_allclose(c.M @ c.L @ Nm, Nm, atol=1e-15)
    np.testing.assert_allclose(Nm @ Nm, Nm, atol=1e-15)
    np.testing.assert_array_equal(Nm, Nm.T)
    A = rng.standard_normal((n, n))
    np.testing.assert_allclose(Nm @ np.kron(A, A), np.kron(A, A) @ Nm, atol=1e-12)
    # M^T vec(Y) for a general square Y
    Y = rng.standard_normal((n, n))
    np.testing.assert_allclose(c.mt_vec(Y), c.M.T @ c.vec(Y), atol=1e-15)


def test_hessian_identity_metric(rng):
    n = 3
    c = SvecCodec(n)
    H = _sym(rng, n)
    h = c.svec(H)
    assert psd_hessian(np.eye(n), c).quad(h) == pytest.approx(np.sum(H * H), rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_hessian_determinant_formula(n, rng):
    X = random_pd(rng, n)
    g = psd_hessian(X).matrix
    _, ld = np.linalg.slogdet(g)
    expected = 0.5 * n * (n - 1) * math.log(2) - (n + 1) * np.linalg.slogdet(X)[1]
    assert ld == pytest.approx(expected, rel=1e-9, abs=1e-9)
    assert psd_hessian_logdet(X) == pytest.approx(expected, abs=1e-9)
    # the Kronecker form on X itself
    _, ld2 = np.linalg.slogdet(SvecCodec(n).sandwich(X))
    assert ld2 == pytest.approx(0.5 * n * (n - 1) * math.log(2) + (n + 1) * np.linalg.slogdet(X)[1], abs=1e-9)


def test_hessian_quadratic_form_trace(rng):
    for n in (2, 3, 4):
        c = SvecCodec(n)
        X = random_pd(rng, n)
        H = _sym(rng, n)
        Xi = np.linalg.inv(X)
        expected = np.trace(Xi @ H @ Xi @ H)
        assert psd_hessian(X, c).quad(c.svec(H)) == pytest.approx(expected, rel=1e-10)


def test_hessian_inverse(rng):
    Ginv = psd_hessian_inverse(np.eye(3)).matrix
    c = SvecCodec(3)
    np.testing.assert_allclose(Ginv, np.diag(np.where(c.offdiag, 0.5, 1.0)), atol=1e-15)
    for n in range(1, 7):
        c = SvecCodec(n)
        X = random_pd(rng, n)
        G = psd_hessian(X, c, scaling=n).matrix
        Gi = psd_hessian_inverse(X, c, scaling=n).matrix
        np.testing.assert_allclose(G @ Gi, np.eye(c.ds), atol=1e-8)
        v = rng.standard_normal(c.ds)
        np.testing.assert_allclose(psd_inverse_apply(X, v, c), psd_hessian_inverse(X, c).matrix @ v,
                                   rtol=1e-10, atol=1e-12)
    with pytest.raises(FactorizationError):
        psd_hessian(np.diag([1.0, -1.0]))


def test_psd_barrier_derivatives_fd(rng):
    n = 3
    b = PSDBarrier(n)
    assert b.scaling == n and b.combined_scaling == 6
    X = random_pd(rng, n)
    x = b.codec.svec(X)
    for _ in range(5):
        h = b.codec.svec(_sym(rng, n)) * 0.1
        assert fd_dir(b.value, x, h) == pytest.approx(b.gradient(x) @ h, rel=1e-6)
        np.testing.assert_allclose(fd_dir(b.gradient, x, h), b.metric(x) @ h, rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(fd_dir(b.metric, x, h), b.dmetric(x, h), rtol=1e-5, atol=1e-6)
        fd2 = fd_dir(lambda z: b.dmetric(z, h), x, h)
        np.testing.assert_allclose(fd2, b.d2metric(x, h), rtol=1e-4, atol=1e-5)
        assert np.linalg.eigvalsh(0.5 * (fd2 + fd2.T)).min() >= -1e-8


def test_symmetry_of_logdet(rng):
    n = 4
    c = SvecCodec(n)
    for _ in range(100):
        X = random_pd(rng, n)
        w, V = np.linalg.eigh(X)
        Xh = V @ np.diag(np.sqrt(w)) @ V.T
        K = _sym(rng, n)
        K /= np.abs(np.linalg.eigvalsh(K)).max()
        H = Xh @ K @ Xh
        assert psd_hessian(X, c).quad(c.svec(H)) <= n + 1e-9


def test_ssc_scaling_bound(rng):
    """sup over H of ||g^{-1/2} D^3 phi[H] g^{-1/2}||_F / ||H||_X lies in [sqrt(2(n+1)), 2 sqrt(n)]."""
    for n in (2, 3):
        b = PSDBarrier(n, scaling=1.0)
        X = random_pd(rng, n)
        x = b.codec.svec(X)
        g = b.metric(x)
        w, V = np.linalg.eigh(g)
        gmh = V @ np.diag(w**-0.5) @ V.T
        best = 0.0
        for _ in range(400):
            h = rng.standard_normal(b.dim)
            D = gmh @ b.dmetric(x, h) @ gmh
            best = max(best, np.linalg.norm(D) / math.sqrt(h @ g @ h))
        # directions H proportional to X attain the upper bound
        D = gmh @ b.dmetric(x, x) @ gmh
        best = max(best, np.linalg.norm(D) / math.sqrt(x @ g @ x))
        assert math.sqrt(2 * (n + 1)) * 0.95 <= best <= 2 * math.sqrt(n) * 1.05


def test_truncated_state_no_constraints(rng):
    n = 3
    X = random_pd(rng, n)
    st = truncated_psd_metric(X, [])
    dense = psd_hessian(X, scaling=2.0 * n * n)
    assert st.logdet == pytest.approx(dense.logdet, abs=1e-9)
    v = rng.standard_normal(st.dim)
    np.testing.assert_allclose(metric_inverse_apply(st, v), dense.solve(v), rtol=1e-9)
    assert not np.any(metric_inverse_apply(st, np.zeros(st.dim)))


@pytest.mark.parametrize("kind", ["log", "vaidya", "lewis"])
def test_fast_path_matches_dense(kind, rng):
    # the Vaidya and Lewis parts need at least d_s constraints
    sizes = [(2, 1), (3, 4), (4, 8), (5, 8), (6, 10)] if kind == "log" else [(2, 3), (2, 8), (3, 6), (3, 8)]
    for n, m in sizes:
        X = random_pd(rng, n)
        cons = _constraints(rng, n, m, X)
        st = truncated_psd_metric(X, cons, kind=kind)
        Amats = np.stack([a for a, _ in cons])
        bar = TruncatedPSDBarrier(n, Amats, np.array([b for _, b in cons]), kind=kind)
        x = bar.codec.svec(X)
        G = bar.metric(x)
        np.testing.assert_allclose(st.dense(), G, rtol=1e-9, atol=1e-9 * np.abs(G).max())
        v = rng.standard_normal(st.dim)
        y = metric_inverse_apply(st, v)
        ref = np.linalg.solve(G, v)
        assert np.linalg.norm(y - ref) <= 1e-6 * np.linalg.norm(ref)
        assert st.logdet == pytest.approx(np.linalg.slogdet(G)[1], rel=1e-9, abs=1e-8)
        np.testing.assert_allclose(st.apply(v), G @ v, rtol=1e-9, atol=1e-9 * np.abs(G).max())
        assert st.quad(v) == pytest.approx(v @ G @ v, rel=1e-9)


def test_truncated_psd_formula(rng):
    """2 n^2 tr(X^-1 H X^-1 H) + 2 ||A_X vec H||^2 for the log variant."""
    n, m = 3, 2
    X = random_pd(rng, n)
    cons = _constraints(rng, n, m, X)
    st = truncated_psd_metric(X, cons)
    c = SvecCodec(n)
    H = _sym(rng, n)
    Xi = np.linalg.inv(X)
    lin = sum((np.sum(A * H) / (np.sum(A * X) - b)) ** 2 for A, b in cons)
    expected = 2 * n * n * np.trace(Xi @ H @ Xi @ H) + 2 * lin
    assert st.quad(c.svec(H)) == pytest.approx(expected, rel=1e-10)


def test_one_rank_one_update_matches_dense_inverse(rng):
    n = 3
    X = random_pd(rng, n)
    st = truncated_psd_metric(X, _constraints(rng, n, 1, X))
    Ginv = np.linalg.inv(st.dense())
    for _ in range(3):
        v = rng.standard_normal(st.dim)
        np.testing.assert_allclose(st.solve(v), Ginv @ v, rtol=1e-6, atol=1e-10)


def test_rank_one_counter(rng):
    n, m = 3, 5
    X = random_pd(rng, n)
    st = truncated_psd_metric(X, _constraints(rng, n, m, X))
    st.rank_one_updates = 0
    for _ in range(4):
        st.solve(rng.standard_normal(st.dim))
    assert st.rank_one_updates == 4 * m


def test_breakdown_raises():
    # a negative base scaling makes 1 + u^T gbar^{-1} u nonpositive
    c = SvecCodec(2)
    u = np.zeros((c.ds, 1))
    u[0, 0] = 2.0
    with pytest.raises(FactorizationError):
        PsdMetricState(np.eye(2), u, -1.0, c)


def test_sample_covariance(rng):
    n, m = 3, 2
    X = random_pd(rng, n)
    st = truncated_psd_metric(X, _constraints(rng, n, m, X))
    r = 0.7
    N = 100_000
    draws = np.array([sample_metric_gaussian(st, r, rng) for _ in range(N)])
    cov = (r * r / st.dim) * np.linalg.inv(st.dense())
    emp = draws.T @ draws / N
    # standard error of a second moment of a zero-mean Gaussian
    se = np.sqrt((cov**2 + np.outer(np.diag(cov), np.diag(cov))) / N)
    assert np.all(np.abs(emp - cov) <= 5 * se)
    mean_se = np.sqrt(np.diag(cov) / N)
    assert np.all(np.abs(draws.mean(axis=0)) <= 5 * mean_se)
    assert not np.any(sample_metric_gaussian(st, 0.0, rng))


def test_det_ratio(rng):
    n = 3
    X = random_pd(rng, n)
    s0 = truncated_psd_metric(X, [])
    assert det_ratio(s0, s0) == 1.0
    s2 = truncated_psd_metric(2 * X, [])
    assert det_ratio(s0, s2) == pytest.approx(2.0 ** (-n * (n + 1)), rel=1e-12)
    for n in (2, 3, 4, 5):
        X = random_pd(rng, n)
        Y = X + 0.1 * random_pd(rng, n)
        cons = _constraints(rng, n, 4, X)
        cons = [(A, min(b, float(np.sum(A * Y)) - 0.1)) for A, b in cons]
        sx = truncated_psd_metric(X, cons)
        sy = truncated_psd_metric(Y, cons)
        dense = math.exp(np.linalg.slogdet(sy.dense())[1] - np.linalg.slogdet(sx.dense())[1])
        assert det_ratio(sx, sy) == pytest.approx(dense, rel=1e-6)


def test_goe_variances(rng):
    X = random_pd(rng, 3)
    dv, ov = goe_variance_check(X, 0.5, 40_000, rng)
    assert dv == pytest.approx(1.0, abs=0.05)
    assert ov == pytest.approx(0.5, abs=0.03)
