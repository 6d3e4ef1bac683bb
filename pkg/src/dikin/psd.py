"""Log-determinant barrier on the PSD cone in svec coordinates.

svec stacks the lower triangle column by column without sqrt(2) weights, so
for symmetric H the off-diagonal coordinate h_(ij) appears twice in vec(H).
With M the svec->vec map, N the symmetrizer and L the lower-triangle picker,
the Hessian of -log det is M^T (X^{-1} kron X^{-1}) M and its inverse is
L N (X kron X) N L^T.

The truncated cone {X >= 0, <A_i, X> > b_i} gets a metric of the form
c_psd * hess(-log det) + U U^T whose inverse, determinant and Gaussian draws
are computed through a chain of rank-one Sherman-Morrison updates.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .errors import FactorizationError, NotInterior
from .linear import LewisBarrier, LogBarrier, VaidyaBarrier, leverage_scores
from .metric import HOLDS, HOLDS_SCALED, UNVERIFIED, Array, Barrier, SymPD


class SvecCodec:
    """Coordinates of n x n symmetric matrices (lower triangle, column-major)."""

    def __init__(self, n: int):
        self.n = int(n)
        cols, rows = [], []
        for j in range(self.n):
            for i in range(j, self.n):
                rows.append(i)
                cols.append(j)
        self.rows = np.array(rows)
        self.cols = np.array(cols)
        self.ds = len(rows)
        self.offdiag = self.rows != self.cols

    def svec(self, X: Array) -> Array:
        return np.asarray(X, dtype=float)[self.rows, self.cols]

    def mat(self, v: Array) -> Array:
        X = np.zeros((self.n, self.n))
        X[self.rows, self.cols] = v
        X[self.cols, self.rows] = v
        return X

    def mat_lower(self, v: Array) -> Array:
        """L^T v as a matrix: entries on and below the diagonal only."""
        X = np.zeros((self.n, self.n))
        X[self.rows, self.cols] = v
        return X

    @staticmethod
    def vec(X: Array) -> Array:
        return np.asarray(X).reshape(-1, order="F")

    def unvec(self, v: Array) -> Array:
        return np.asarray(v).reshape(self.n, self.n, order="F")

    def mt_vec(self, Y: Array) -> Array:
        """M^T vec(Y) for any square Y: Y_ii on the diagonal, Y_ij + Y_ji off it."""
        Y = np.asarray(Y, dtype=float)
        return Y[self.rows, self.cols] + np.where(self.offdiag, Y[self.cols, self.rows], 0.0)

    @cached_property
    def M(self) -> Array:
        n = self.n
        M = np.zeros((n * n, self.ds))
        for k, (i, j) in enumerate(zip(self.rows, self.cols)):
            M[i + j * n, k] = 1.0
            M[j + i * n, k] = 1.0
        return M

    @cached_property
    def L(self) -> Array:
        n = self.n
        L = np.zeros((self.ds, n * n))
        L[np.arange(self.ds), self.rows + self.cols * n] = 1.0
        return L

    @cached_property
    def N(self) -> Array:
        n = self.n
        K = np.zeros((n * n, n * n))
        for i in range(n):
            for j in range(n):
                K[i + j * n, j + i * n] = 1.0
        return 0.5 * (np.eye(n * n) + K)

    def sandwich(self, P: Array, Q: Array | None = None) -> Array:
        """M^T (P kron Q) M for symmetric P, Q (Q defaults to P)."""
        Q = P if Q is None else Q
        return self.M.T @ np.kron(P, Q) @ self.M


def _chol(X: Array) -> Array:
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("matrix is not positive definite") from exc


def logdet_barrier_value(X: Array) -> float:
    """-log det X for PD X, +inf otherwise."""
    X = np.asarray(X, dtype=float)
    try:
        L = np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return math.inf
    return -2.0 * float(np.log(np.diag(L)).sum())


def psd_hessian(X: Array, codec: SvecCodec | None = None, scaling: float = 1.0) -> SymPD:
    """scaling * M^T (X^{-1} kron X^{-1}) M."""
    X = np.asarray(X, dtype=float)
    codec = codec or SvecCodec(X.shape[0])
    Li = np.linalg.inv(_chol(X))
    B = Li.T @ Li
    return SymPD(scaling * codec.sandwich(B), check=False)


def psd_hessian_inverse(X: Array, codec: SvecCodec | None = None, scaling: float = 1.0) -> SymPD:
    """(1/scaling) * L N (X kron X) N L^T."""
    X = np.asarray(X, dtype=float)
    _chol(X)
    codec = codec or SvecCodec(X.shape[0])
    Nm = codec.N
    return SymPD(codec.L @ Nm @ np.kron(X, X) @ Nm @ codec.L.T / scaling, check=False)


def psd_inverse_apply(X: Array, v: Array, codec: SvecCodec | None = None) -> Array:
    """(hess -log det)^{-1} v without forming any d_s x d_s matrix."""
    codec = codec or SvecCodec(np.asarray(X).shape[0])
    W = codec.mat_lower(v)
    W = 0.5 * (W + W.T)
    return codec.svec(X @ W @ X)


def psd_hessian_apply(Xinv: Array, v: Array, codec: SvecCodec) -> Array:
    H = codec.mat(v)
    return codec.mt_vec(Xinv @ H @ Xinv)


def psd_hessian_logdet(X: Array, scaling: float = 1.0) -> float:
    """log det of scaling * M^T (X^{-1} kron X^{-1}) M in closed form."""
    n = X.shape[0]
    ds = n * (n + 1) // 2
    _, ld = np.linalg.slogdet(X)
    return ds * math.log(scaling) + 0.5 * n * (n - 1) * math.log(2.0) - (n + 1) * ld


class PSDBarrier(Barrier):
    """-log det X on svec coordinates; scaling n standalone, n(n+1)/2 when combined."""

    name = "psd"

    def __init__(self, n: int, scaling: float | None = None):
        self.codec = SvecCodec(n)
        self.n = int(n)
        super().__init__(self.codec.ds, n, n,
                         {"SSC": HOLDS_SCALED, "LTSC": HOLDS, "ASC": HOLDS_SCALED, "SASC": UNVERIFIED,
                          "D2g_psd": HOLDS})
        self.scaling = float(n if scaling is None else scaling)

    @property
    def combined_scaling(self) -> float:
        return float(self.codec.ds)

    def in_domain(self, x):
        return np.isfinite(logdet_barrier_value(self.codec.mat(x)))

    def _inv(self, x):
        X = self.codec.mat(x)
        try:
            Li = np.linalg.inv(np.linalg.cholesky(X))
        except np.linalg.LinAlgError as exc:
            raise NotInterior("psd: matrix is not positive definite") from exc
        return Li.T @ Li

    def _value(self, x):
        return logdet_barrier_value(self.codec.mat(x))

    def _gradient(self, x):
        return -self.codec.mt_vec(self._inv(x))

    def _metric(self, x):
        return self.codec.sandwich(self._inv(x))

    def _dmetric(self, x, h):
        B = self._inv(x)
        C = B @ self.codec.mat(h) @ B
        return -self.codec.M.T @ (np.kron(C, B) + np.kron(B, C)) @ self.codec.M

    def _d2metric(self, x, h):
        B = self._inv(x)
        H = self.codec.mat(h)
        C = B @ H @ B
        E = C @ H @ B
        E = 0.5 * (E + E.T)
        return 2.0 * self.codec.M.T @ (np.kron(E, B) + np.kron(C, C) + np.kron(B, E)) @ self.codec.M


def goe_variance_check(X: Array, r: float, n_draws: int, rng: np.random.Generator):
    """Draw H ~ N(0, (r^2/d_s) g^{-1}) with g = n hess(-log det) and whiten it.

    Returns the empirical variances of the diagonal and off-diagonal entries of
    sqrt(d_s n)/r X^{-1/2} H X^{-1/2}; they should be near 1 and 1/2.
    """
    n = X.shape[0]
    codec = SvecCodec(n)
    g = psd_hessian(X, codec, scaling=n)
    w, V = np.linalg.eigh(X)
    Xmh = V @ np.diag(w**-0.5) @ V.T
    xi = rng.standard_normal((n_draws, codec.ds))
    H = np.linalg.solve(g.chol.T, xi.T).T * (r / math.sqrt(codec.ds))
    mats = np.stack([codec.mat(h) for h in H])
    Z = math.sqrt(codec.ds * n) / r * Xmh @ mats @ Xmh
    di = np.arange(n)
    diag_var = Z[:, di, di].var(axis=0).mean()
    iu = np.tril_indices(n, -1)
    off_var = Z[:, iu[0], iu[1]].var(axis=0).mean() if n > 1 else float("nan")
    return float(diag_var), float(off_var)


# -- truncated PSD cone -------------------------------------------------------


class PsdMetricState:
    """Metric c_psd * hess(-log det X) + U U^T at a fixed X.

    ``U`` has one column per linear constraint.  The Sherman-Morrison chain
    z_i = gbar_{i-1}^{-1} u_i and the factors 1 + u_i^T z_i are built once per
    state, so each inverse-apply costs m rank-one updates.
    """

    def __init__(self, X: Array, U: Array, c_psd: float, codec: SvecCodec | None = None):
        self.X = np.asarray(X, dtype=float)
        self.codec = codec or SvecCodec(self.X.shape[0])
        self.c_psd = float(c_psd)
        self.U = np.asarray(U, dtype=float).reshape(self.codec.ds, -1)
        Lx = _chol(self.X)
        Li = np.linalg.inv(Lx)
        self.Xinv = Li.T @ Li
        self.logdet_X = 2.0 * float(np.log(np.diag(Lx)).sum())
        self.rank_one_updates = 0
        self._build_chain()

    @property
    def dim(self) -> int:
        return self.codec.ds

    @property
    def m(self) -> int:
        return self.U.shape[1]

    def _base_inv(self, v: Array) -> Array:
        return psd_inverse_apply(self.X, v, self.codec) / self.c_psd

    def _build_chain(self):
        m = self.m
        Y = np.column_stack([self._base_inv(self.U[:, j]) for j in range(m)]) if m else np.zeros((self.dim, 0))
        self.Z = np.zeros_like(Y)
        self.denom = np.zeros(m)
        for i in range(m):
            z = Y[:, i].copy()
            den = 1.0 + self.U[:, i] @ z
            if not den > 0:
                raise FactorizationError("rank-one update broke positivity")
            self.Z[:, i] = z
            self.denom[i] = den
            if i + 1 < m:
                coef = (self.U[:, i] @ Y[:, i + 1 :]) / den
                Y[:, i + 1 :] -= np.outer(z, coef)
        ds, n = self.codec.ds, self.codec.n
        self.logdet = (
            ds * math.log(self.c_psd) + 0.5 * n * (n - 1) * math.log(2.0) - (n + 1) * self.logdet_X
            + float(np.log(self.denom).sum())
        )

    def solve(self, v: Array) -> Array:
        """g^{-1} v via the rank-one recursion."""
        y = self._base_inv(np.asarray(v, dtype=float))
        for i in range(self.m):
            y = y - self.Z[:, i] * ((self.U[:, i] @ y) / self.denom[i])
            self.rank_one_updates += 1
        return y

    def apply(self, v: Array) -> Array:
        return self.c_psd * psd_hessian_apply(self.Xinv, v, self.codec) + self.U @ (self.U.T @ v)

    def quad(self, v: Array) -> float:
        H = self.codec.mat(v)
        T = self.Xinv @ H
        return self.c_psd * float(np.einsum("ij,ji->", T, T)) + float(np.sum((self.U.T @ v) ** 2))

    def draw(self, rng: np.random.Generator) -> Array:
        """A vector with covariance g^{-1}: g^{-1} [B U] w with B B^T = c_psd hess."""
        n = self.codec.n
        w1 = rng.standard_normal((n, n))
        w2 = rng.standard_normal(self.m)
        ev, V = np.linalg.eigh(self.X)
        Xmh = (V / np.sqrt(ev)) @ V.T
        rhs = math.sqrt(self.c_psd) * self.codec.mt_vec(Xmh @ w1 @ Xmh) + self.U @ w2
        return self.solve(rhs)

    def dense(self) -> Array:
        return self.c_psd * self.codec.sandwich(self.Xinv) + self.U @ self.U.T


def metric_inverse_apply(state: PsdMetricState, v: Array) -> Array:
    return state.solve(v)


def sample_metric_gaussian(state: PsdMetricState, r: float, rng: np.random.Generator) -> Array:
    """A draw from N(0, (r^2/d_s) g^{-1})."""
    return (r / math.sqrt(state.dim)) * state.draw(rng)


def det_ratio(state_x: PsdMetricState, state_y: PsdMetricState) -> float:
    """det g(Y) / det g(X)."""
    return math.exp(state_y.logdet - state_x.logdet)


class TruncatedPSDBarrier(Barrier):
    """prefactor * (psd_scaling * (-log det X) + linear barrier on <A_i, X> >= b_i).

    ``kind`` selects the linear part: "log", "vaidya" or "lewis".  The
    defaults reproduce 2 n^2 tr(X^{-1} H X^{-1} H) + 2 ||A_X vec H||^2.
    """

    name = "truncated-psd"

    def __init__(self, n: int, Amats, b, kind: str = "log", psd_scaling: float | None = None,
                 prefactor: float = 2.0, fast_threshold: int | None = None, **lin_kwargs):
        self.codec = SvecCodec(n)
        self.n = int(n)
        Amats = np.asarray(Amats, dtype=float).reshape(-1, n, n)
        Amats = 0.5 * (Amats + np.transpose(Amats, (0, 2, 1)))
        self.Amats = Amats
        A_lin = np.array([self.codec.mt_vec(Ai) for Ai in Amats]).reshape(-1, self.codec.ds)
        self.kind = kind
        if kind == "log":
            lin = LogBarrier(A_lin, b)
        elif kind == "vaidya":
            lin = VaidyaBarrier(A_lin, b, **({"c": 44.0} | lin_kwargs))
        elif kind == "lewis":
            lin = LewisBarrier(A_lin, b, **lin_kwargs)
        else:
            raise ValueError(f"unknown linear metric kind {kind!r}")
        self.lin = lin
        self.psd = PSDBarrier(n, scaling=float(n * n if psd_scaling is None else psd_scaling))
        self.prefactor = float(prefactor)
        self.fast_threshold = self.codec.ds if fast_threshold is None else fast_threshold
        super().__init__(self.codec.ds, self.psd.nu + lin.nu, self.psd.nu_bar + lin.nu_bar,
                         {"SSC": HOLDS_SCALED, "LTSC": HOLDS_SCALED, "ASC": HOLDS_SCALED})
        self.scaling = self.prefactor
        self.hessian_metric = kind == "log"

    @property
    def m(self) -> int:
        return self.lin.m

    def in_domain(self, x):
        return self.lin.in_domain(x) and self.psd.in_domain(x)

    def _value(self, x):
        a = self.psd.value(x)
        if not np.isfinite(a):
            return math.inf
        b = self.lin.value(x)
        return a + b if np.isfinite(b) else math.inf

    def _gradient(self, x):
        return self.psd.gradient(x) + self.lin.gradient(x)

    def _metric(self, x):
        return self.psd.metric(x) + self.lin.metric(x)

    def _dmetric(self, x, h):
        return self.psd.dmetric(x, h) + self.lin.dmetric(x, h)

    def _d2metric(self, x, h):
        return self.psd.d2metric(x, h) + self.lin.d2metric(x, h)

    def _weights(self, x):
        st = self.lin._state(x)
        lin = self.lin
        if self.kind == "log":
            wt = np.full(lin.m, lin.scaling)
        elif self.kind == "vaidya":
            m, d = lin.A.shape
            wt = lin.scaling * lin.coef * (leverage_scores(st.Ax).sigma + d / m)
        else:
            wt = lin.scaling * lin.coef * lin.weights(x)
        return st, wt

    def state(self, x) -> PsdMetricState:
        x = np.asarray(x, dtype=float)
        if not self.in_domain(x):
            raise NotInterior("truncated-psd: point outside the open domain")
        st, wt = self._weights(x)
        U = (st.Ax * np.sqrt(self.prefactor * wt)[:, None]).T
        return PsdMetricState(self.codec.mat(x), U, self.prefactor * self.psd.scaling, self.codec)

    def local(self, x):
        if self.m <= self.fast_threshold:
            return self.state(x)
        return SymPD(self.metric(x), check=False)


def truncated_psd_metric(X: Array, constraints, kind: str = "log", **kwargs) -> PsdMetricState:
    """State of the truncated-cone metric at X for constraints [(A_i, b_i), ...]."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    codec = SvecCodec(n)
    constraints = list(constraints)
    if constraints:
        Amats = np.stack([np.asarray(Ai, dtype=float) for Ai, _ in constraints])
        b = np.array([bi for _, bi in constraints], dtype=float)
    else:
        Amats = np.zeros((0, n, n))
        b = np.zeros(0)
    if not constraints:
        psd_scaling = kwargs.get("psd_scaling", n * n)
        prefactor = kwargs.get("prefactor", 2.0)
        return PsdMetricState(X, np.zeros((codec.ds, 0)), prefactor * psd_scaling, codec)
    bar = TruncatedPSDBarrier(n, Amats, b, kind=kind, **kwargs)
    return bar.state(codec.svec(X))
