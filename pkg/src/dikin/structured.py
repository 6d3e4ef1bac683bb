"""Closed-form barriers for quadratic regions, epigraphs and cones.

Every barrier here has the form psi = -log u(y) (plus, for the per-coordinate
families, a multiple of -log of one coordinate).  A single derivative engine
expands the metric Hessian and its first two directional derivatives from the
derivatives of u, so each family only supplies u and its derivatives.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InfeasibleBarrier, NotInterior
from .metric import HOLDS, HOLDS_SCALED, Array, Barrier, symmetry_fallback


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _neglog_terms(u, G, U2, U3h=None, U4hh=None, h=None, order=0):
    """Hessian of -log u (order 0), its derivative along h (1) or second derivative (2).

    Arrays carry a leading batch axis: u (B,), G (B,n), U2 (B,n,n),
    U3h = D(grad^2 u)[h] (B,n,n), U4hh = D^2(grad^2 u)[h,h] (B,n,n), h (B,n).
    """
    u_ = u[:, None, None]
    GG = _outer(G, G)
    if order == 0:
        return -U2 / u_ + GG / u_**2
    U2h = np.einsum("bij,bj->bi", U2, h)
    u1 = np.einsum("bi,bi->b", G, h)[:, None, None]
    sym2 = _outer(U2h, G) + _outer(G, U2h)
    if order == 1:
        return -U3h / u_ + U2 * u1 / u_**2 + sym2 / u_**2 - 2.0 * u1 * GG / u_**3
    u2 = np.einsum("bi,bi->b", U2h, h)[:, None, None]
    U3hh = np.einsum("bij,bj->bi", U3h, h)
    sym3 = _outer(U3hh, G) + _outer(G, U3hh)
    return (
        -U4hh / u_
        + 2.0 * U3h * u1 / u_**2
        + U2 * u2 / u_**2
        - 2.0 * U2 * u1**2 / u_**3
        + sym3 / u_**2
        + 2.0 * _outer(U2h, U2h) / u_**2
        - 4.0 * u1 * sym2 / u_**3
        - 2.0 * u2 * GG / u_**3
        + 6.0 * u1**2 * GG / u_**4
    )


class QuadraticLogBarrier(Barrier):
    """psi(y) = -log q(y) with q(y) = c0 + b^T y + 1/2 y^T C y."""

    name = "quadratic-log"

    def __init__(self, C, bvec, c0, nu, nu_bar, flags, positive_index=None):
        self.C = np.asarray(C, dtype=float)
        self.bvec = np.asarray(bvec, dtype=float)
        self.c0 = float(c0)
        # optional coordinate that must stay positive (cone branch selector)
        self.positive_index = positive_index
        super().__init__(self.C.shape[0], nu, nu_bar, flags)

    def q(self, y: Array) -> float:
        return self.c0 + self.bvec @ y + 0.5 * y @ self.C @ y

    def in_domain(self, y):
        y = np.asarray(y, dtype=float)
        if self.positive_index is not None and not y[self.positive_index] > 0:
            return False
        return bool(self.q(y) > 0)

    def _check(self, y):
        if not self.in_domain(y):
            raise NotInterior(f"{self.name}: point outside the open domain")
        return self.q(y), self.bvec + self.C @ y

    def _value(self, y):
        if not self.in_domain(y):
            return math.inf
        return -math.log(self.q(y))

    def _gradient(self, y):
        q, g = self._check(y)
        return -g / q

    def _batch(self, y):
        q, g = self._check(y)
        return np.array([q]), g[None, :], self.C[None, :, :]

    def _metric(self, y):
        u, G, U2 = self._batch(y)
        return _neglog_terms(u, G, U2)[0]

    def _dmetric(self, y, h):
        u, G, U2 = self._batch(y)
        Z = np.zeros_like(U2)
        return _neglog_terms(u, G, U2, Z, Z, h[None, :], order=1)[0]

    def _d2metric(self, y, h):
        u, G, U2 = self._batch(y)
        Z = np.zeros_like(U2)
        return _neglog_terms(u, G, U2, Z, Z, h[None, :], order=2)[0]


def ellipsoid_barrier(Q, p, l, scaling: float | None = None) -> QuadraticLogBarrier:
    """Barrier for {x : 1/2 x^T Q x + p^T x + l <= 0}, scaled by the dimension."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = np.asarray(p, dtype=float).ravel()
    d = Q.shape[0]
    if np.allclose(Q, 0):
        raise InfeasibleBarrier("Q must be nonzero")
    if np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-12 * np.abs(Q).max():
        raise InfeasibleBarrier("Q must be positive semidefinite")
    z = np.linalg.lstsq(Q, p, rcond=None)[0]
    in_range = np.allclose(Q @ z, p, atol=1e-10 * max(1.0, np.abs(p).max()))
    if in_range and float(l) - 0.5 * p @ z >= 0:
        raise InfeasibleBarrier("ellipsoid constraint has empty interior")
    b = QuadraticLogBarrier(-Q, -p, -float(l), 1.0, symmetry_fallback(1.0),
                            {"SSC": HOLDS_SCALED, "LTSC": HOLDS, "ASC": HOLDS_SCALED, "D2g_psd": HOLDS})
    b.name = "ellipsoid"
    b.Q, b.p, b.l = Q, p, float(l)
    b.center_hint = -z if in_range else None
    return b.with_scaling(d if scaling is None else scaling)


def gaussian_epigraph_barrier(Sigma, mu, scaling: float | None = None) -> QuadraticLogBarrier:
    """Barrier for {(x, t) : 1/2 (x-mu)^T Sigma (x-mu) <= t} on R^{d+1}."""
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    mu = np.asarray(mu, dtype=float).ravel()
    d = S.shape[0]
    C = np.zeros((d + 1, d + 1))
    C[:d, :d] = -S
    bvec = np.concatenate([S @ mu, [1.0]])
    b = QuadraticLogBarrier(C, bvec, -0.5 * mu @ S @ mu, 1.0, symmetry_fallback(1.0),
                            {"SSC": HOLDS_SCALED, "LTSC": HOLDS, "ASC": HOLDS_SCALED, "D2g_psd": HOLDS})
    b.name = "gaussian"
    b.Sigma, b.mu = S, mu
    return b.with_scaling(d + 1 if scaling is None else scaling)


def soc_barrier(Sigma, mu, scaling: float | None = None) -> QuadraticLogBarrier:
    """Barrier for {(x, t) : (x-mu)^T Sigma (x-mu) <= t^2, t > 0} on R^{d+1}."""
    S = np.atleast_2d(np.asarray(Sigma, dtype=float))
    mu = np.asarray(mu, dtype=float).ravel()
    d = S.shape[0]
    C = np.zeros((d + 1, d + 1))
    C[:d, :d] = -2.0 * S
    C[d, d] = 2.0
    bvec = np.concatenate([2.0 * S @ mu, [0.0]])
    b = QuadraticLogBarrier(C, bvec, -mu @ S @ mu, 2.0, symmetry_fallback(2.0),
                            {"SSC": HOLDS_SCALED, "LTSC": HOLDS_SCALED, "ASC": HOLDS_SCALED},
                            positive_index=d)
    b.name = "soc"
    b.Sigma, b.mu = S, mu
    return b.with_scaling(d + 1 if scaling is None else scaling)


# -- per-coordinate epigraph families ---------------------------------------
#
# Each family is psi_i = -log(alpha(x_i) + beta(t_i)) - kappa log w_i where w
# is x or t.  The tables return the derivatives of alpha and beta up to order
# four; the feasibility predicate is evaluated before any derivative.


def _entropy_alpha(x):
    lx = np.log(x)
    return -x * lx, -(lx + 1.0), -1.0 / x, 1.0 / x**2, -2.0 / x**3


def _log_alpha(x):
    return np.log(x), 1.0 / x, -1.0 / x**2, 2.0 / x**3, -6.0 / x**4


def _neg_alpha(x):
    z = np.zeros_like(x)
    return -x, -np.ones_like(x), z, z, z


def _square_alpha(x):
    z = np.zeros_like(x)
    return -(x**2), -2.0 * x, -2.0 * np.ones_like(x), z, z


def _linear_beta(t):
    z = np.zeros_like(t)
    return t, np.ones_like(t), z, z, z


def _log_beta(t):
    return np.log(t), 1.0 / t, -1.0 / t**2, 2.0 / t**3, -6.0 / t**4


def _power_beta(q):
    def f(t):
        return (
            t**q,
            q * t ** (q - 1),
            q * (q - 1) * t ** (q - 2),
            q * (q - 1) * (q - 2) * t ** (q - 3),
            q * (q - 1) * (q - 2) * (q - 3) * t ** (q - 4),
        )

    return f


class PerCoordinateBarrier(Barrier):
    """Separable epigraph barrier on (x_1..x_d, t_1..t_d) with 2x2 coupling blocks."""

    def __init__(self, d, name, alpha, beta, kappa, log_on, x_positive, t_positive, nu1, scaling=None):
        self.d = int(d)
        self.alpha, self.beta = alpha, beta
        self.kappa = float(kappa)
        self.log_on = log_on  # 0: -kappa log x, 1: -kappa log t
        self.x_positive, self.t_positive = x_positive, t_positive
        super().__init__(2 * self.d, self.d * nu1, self.d * symmetry_fallback(nu1),
                         {"SSC": HOLDS_SCALED, "LTSC": HOLDS_SCALED, "ASC": HOLDS_SCALED})
        self.name = name
        self.scaling = float(max(2, self.d) if scaling is None else scaling)
        # scaling 2 certifies SSC/SLTSC; d is needed for SASC; the max is applied
        self.flags["scaling_rule"] = "max(2, d)"

    def split(self, y):
        y = np.asarray(y, dtype=float)
        return y[: self.d], y[self.d :]

    def in_domain(self, y):
        x, t = self.split(y)
        if self.x_positive and not np.all(x > 0):
            return False
        if self.t_positive and not np.all(t > 0):
            return False
        with np.errstate(all="ignore"):
            u = self.alpha(x)[0] + self.beta(t)[0]
        return bool(np.all(u > 0))

    def _parts(self, y):
        if not self.in_domain(y):
            raise NotInterior(f"{self.name}: point outside the open domain")
        x, t = self.split(y)
        a = self.alpha(x)
        b = self.beta(t)
        w = x if self.log_on == 0 else t
        return x, t, a, b, a[0] + b[0], w

    def _value(self, y):
        if not self.in_domain(y):
            return math.inf
        _, _, _, _, u, w = self._parts(y)
        return float(-np.log(u).sum() - self.kappa * np.log(w).sum())

    def _gradient(self, y):
        _, _, a, b, u, w = self._parts(y)
        gx = -a[1] / u
        gt = -b[1] / u
        if self.log_on == 0:
            gx = gx - self.kappa / w
        else:
            gt = gt - self.kappa / w
        return np.concatenate([gx, gt])

    def _blocks(self, y, h=None, order=0):
        _, _, a, b, u, w = self._parts(y)
        n = self.d
        G = np.stack([a[1], b[1]], axis=1)
        U2 = np.zeros((n, 2, 2))
        U2[:, 0, 0], U2[:, 1, 1] = a[2], b[2]
        j = self.log_on
        if order == 0:
            B = _neglog_terms(u, G, U2)
            B[:, j, j] += self.kappa / w**2
            return B
        hb = np.stack([h[:n], h[n:]], axis=1)
        U3 = np.zeros((n, 2, 2))
        U3[:, 0, 0], U3[:, 1, 1] = a[3] * hb[:, 0], b[3] * hb[:, 1]
        U4 = np.zeros((n, 2, 2))
        U4[:, 0, 0], U4[:, 1, 1] = a[4] * hb[:, 0] ** 2, b[4] * hb[:, 1] ** 2
        B = _neglog_terms(u, G, U2, U3, U4, hb, order=order)
        hw = hb[:, j]
        if order == 1:
            B[:, j, j] += -2.0 * self.kappa * hw / w**3
        else:
            B[:, j, j] += 6.0 * self.kappa * hw**2 / w**4
        return B

    def _assemble(self, B):
        n = self.d
        out = np.zeros((2 * n, 2 * n))
        i = np.arange(n)
        out[i, i] = B[:, 0, 0]
        out[i, n + i] = B[:, 0, 1]
        out[n + i, i] = B[:, 1, 0]
        out[n + i, n + i] = B[:, 1, 1]
        return out

    def metric_blocks(self, y):
        """The d coupling blocks of the (scaled) metric, shape (d, 2, 2)."""
        return self.scaling * self._blocks(np.asarray(y, dtype=float))

    def _metric(self, y):
        return self._assemble(self._blocks(y))

    def _dmetric(self, y, h):
        return self._assemble(self._blocks(y, h, order=1))

    def _d2metric(self, y, h):
        return self._assemble(self._blocks(y, h, order=2))


def entropy_barrier(d: int, scaling: float | None = None) -> PerCoordinateBarrier:
    """-sum [log(t_i - x_i log x_i) + 36 log x_i]."""
    return PerCoordinateBarrier(d, "entropy", _entropy_alpha, _linear_beta, 36.0, 0, True, False, 37.0, scaling)


def log_epigraph_barrier(d: int, scaling: float | None = None) -> PerCoordinateBarrier:
    """-sum [log(t_i + log x_i) + 36 log x_i], epigraph of -log x."""
    return PerCoordinateBarrier(d, "log-epigraph", _log_alpha, _linear_beta, 36.0, 0, True, False, 37.0, scaling)


def exp_epigraph_barrier(d: int, scaling: float | None = None) -> PerCoordinateBarrier:
    """-sum [log(log t_i - x_i) + 36 log t_i], epigraph of exp(x)."""
    return PerCoordinateBarrier(d, "exp-epigraph", _neg_alpha, _log_beta, 36.0, 1, False, True, 37.0, scaling)


def power_barrier(d: int, p: float, scaling: float | None = None) -> PerCoordinateBarrier:
    """-sum [log(t_i^{2/p} - x_i^2) + 72 log t_i], epigraph of |x|^p."""
    if p < 1:
        raise ValueError("power barrier needs p >= 1")
    b = PerCoordinateBarrier(d, "power", _square_alpha, _power_beta(2.0 / p), 72.0, 1, False, True, 74.0, scaling)
    b.p = float(p)
    return b
