"""Metrics for polytopes {x : Ax >= b}.

Notation: s = Ax - b is the slack, A_x = S^{-1} A the rescaled constraint
matrix and s_h = A_x h the relative slack change along a direction h.  All
derivative formulas are closed form; the tests compare them with central
differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, NotInterior, ShapeError
from .metric import HOLDS, HOLDS_SCALED, UNVERIFIED, Array, Barrier, SymPD

PINV_RTOL = 1e-12


@dataclass(frozen=True)
class SlackState:
    s: Array
    Ax: Array


@dataclass(frozen=True)
class LeverageScores:
    sigma: Array


@dataclass(frozen=True)
class LewisWeights:
    w: Array
    p: float
    residual: float
    iterations: int = 0


def slack_state(A: Array, b: Array, x: Array) -> SlackState:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s = A @ np.asarray(x, dtype=float) - np.asarray(b, dtype=float)
    if not np.all(s > 0):
        raise NotInterior(f"min slack {s.min():.3e} is not positive")
    return SlackState(s=s, Ax=A / s[:, None])


def _projection(M: Array) -> Array:
    """Orthogonal projection onto range(M) with a relative rank cutoff."""
    U, S, _ = np.linalg.svd(M, full_matrices=False)
    if S.size == 0 or S[0] == 0:
        return np.zeros((M.shape[0], M.shape[0]))
    U = U[:, S > PINV_RTOL * S[0]]
    return U @ U.T


def leverage_scores(M: Array) -> LeverageScores:
    """sigma_i = [M (M^T M)^+ M^T]_ii."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    U, S, _ = np.linalg.svd(M, full_matrices=False)
    if S.size == 0 or S[0] == 0:
        return LeverageScores(np.zeros(M.shape[0]))
    U = U[:, S > PINV_RTOL * S[0]]
    return LeverageScores(np.einsum("ij,ij->i", U, U))


# -- logarithmic barrier -------------------------------------------------


def log_metric(A: Array, b: Array, x: Array) -> SymPD:
    st = slack_state(A, b, x)
    return SymPD(st.Ax.T @ st.Ax)


def d_log_metric(A: Array, b: Array, x: Array, h: Array) -> Array:
    st = slack_state(A, b, x)
    sh = st.Ax @ h
    return -2.0 * st.Ax.T @ (sh[:, None] * st.Ax)


def d2_log_metric(A: Array, b: Array, x: Array, h: Array) -> Array:
    st = slack_state(A, b, x)
    sh = st.Ax @ h
    return 6.0 * st.Ax.T @ ((sh**2)[:, None] * st.Ax)


# -- leverage scores and the Vaidya metric -------------------------------


def _leverage_parts(Ax: Array):
    P = _projection(Ax)
    sigma = np.diag(P).copy()
    return P, sigma


def d_leverage(A: Array, b: Array, x: Array, h: Array) -> Array:
    """Directional derivative of the leverage scores of A_x."""
    st = slack_state(A, b, x)
    P, sigma = _leverage_parts(st.Ax)
    sh = st.Ax @ h
    return -2.0 * (sigma * sh - (P * P) @ sh)


def _d2_leverage(P: Array, sigma: Array, sh: Array) -> Array:
    P2 = P * P
    PS = P * sh[None, :]  # P S_h
    PSP = PS @ P
    return (
        6.0 * sh**2 * sigma
        - 6.0 * P2 @ sh**2
        - 8.0 * sh * (P2 @ sh)
        + 8.0 * np.einsum("ij,ji->i", PSP * sh[None, :], P)
    )


def vaidya_metric(A: Array, b: Array, x: Array, c: float = 22.0) -> SymPD:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, d = A.shape
    if m < d:
        raise ShapeError(f"Vaidya metric needs m >= d, got m={m}, d={d}")
    st = slack_state(A, b, x)
    sigma = leverage_scores(st.Ax).sigma
    D = sigma + d / m
    return SymPD(c * math.sqrt(m / d) * st.Ax.T @ (D[:, None] * st.Ax))


# -- Lewis weights ---------------------------------------------------------


def default_lewis_p(m: int) -> float:
    return 2.0 * max(1, math.ceil(math.log2(max(m, 2))))


def _lewis_tau(M: Array, w: Array, p: float) -> Array:
    """tau_i = a_i^T (A^T W^{1-2/p} A)^{-1} a_i."""
    G = M.T @ (w[:, None] ** (1.0 - 2.0 / p) * M)
    L = np.linalg.cholesky(G)
    Z = np.linalg.solve(L, M.T)
    return np.einsum("ij,ij->j", Z, Z)


def lewis_weights(M: Array, p: float = 4.0, tol: float = 1e-10, max_iter: int = 10_000) -> LewisWeights:
    """Solve w_i^{2/p} = a_i^T (A^T W^{1-2/p} A)^{-1} a_i by damped fixed-point iteration.

    The damping acts on log-weights with step min(1, 2/p).  With that step
    the uniform-rescaling mode of the map is annihilated and every other
    mode contracts by at least 1 - 2/p.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m, d = M.shape
    if p < 2:
        raise ValueError("Lewis weights need p >= 2")
    if np.linalg.matrix_rank(M) < d:
        raise ShapeError("Lewis weights need a full column rank matrix")
    eta = min(1.0, 2.0 / p)
    w = np.full(m, d / m)
    res = math.inf
    for it in range(1, max_iter + 1):
        tau = _lewis_tau(M, w, p)
        target = tau ** (p / 2.0)
        # residual of the defining equation w = sigma(W^{1/2-1/p} A)
        res = float(np.abs(w ** (1.0 - 2.0 / p) * tau - w).max())
        if res <= tol:
            return LewisWeights(w=w, p=p, residual=res, iterations=it)
        w = np.exp((1.0 - eta) * np.log(w) + eta * np.log(target))
    raise ConvergenceError(f"Lewis weights did not converge, residual {res:.3e}", residual=res)


def _lewis_parts(Ax: Array, p: float, tol: float):
    lw = lewis_weights(Ax, p, tol)
    w = lw.w
    B = (w ** (0.5 - 1.0 / p))[:, None] * Ax
    P = _projection(B)
    return w, P


def _d_lewis(Ax: Array, w: Array, P: Array, p: float, sh: Array) -> Array:
    cp = 1.0 - 2.0 / p
    Lam = np.diag(np.diag(P)) - P * P
    G = np.diag(w) - cp * Lam
    return -2.0 * Lam @ np.linalg.solve(G, w * sh)


def d_lewis_weights(A: Array, b: Array, x: Array, p: float, h: Array, tol: float = 1e-12) -> Array:
    st = slack_state(A, b, x)
    w, P = _lewis_parts(st.Ax, p, tol)
    return _d_lewis(st.Ax, w, P, p, st.Ax @ h)


def lewis_metric(A: Array, b: Array, x: Array, p: float | None = None, c: float = 1.0) -> SymPD:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, d = A.shape
    if m < d:
        raise ShapeError(f"Lewis metric needs m >= d, got m={m}, d={d}")
    p = default_lewis_p(m) if p is None else p
    st = slack_state(A, b, x)
    w = lewis_weights(st.Ax, p).w
    return SymPD(c * math.sqrt(d) * st.Ax.T @ (w[:, None] * st.Ax))


# -- barrier objects -------------------------------------------------------


class _PolytopeBarrier(Barrier):
    def __init__(self, A, b, nu, nu_bar, flags):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).ravel()
        if A.shape[0] != b.shape[0]:
            raise ShapeError("A and b have inconsistent row counts")
        if np.any(np.all(A == 0, axis=1)):
            raise ShapeError("A has an all-zero row")
        self.A, self.b = A, b
        super().__init__(A.shape[1], nu, nu_bar, flags)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def slack(self, x: Array) -> Array:
        return self.A @ x - self.b

    def in_domain(self, x: Array) -> bool:
        return bool(np.all(self.slack(np.asarray(x, dtype=float)) > 0))

    def _state(self, x: Array) -> SlackState:
        s = self.slack(x)
        if not np.all(s > 0):
            raise NotInterior(f"{self.name}: min slack {s.min():.3e}")
        return SlackState(s=s, Ax=self.A / s[:, None])

    def symmetric_chord_ok(self, x: Array, y: Array) -> bool:
        """y lies in K intersected with its reflection through x."""
        st = self._state(x)
        return bool(np.abs(st.Ax @ (y - x)).max() <= 1.0)


class LogBarrier(_PolytopeBarrier):
    """phi(x) = -sum log(a_i^T x - b_i), g = A_x^T A_x."""

    name = "log"

    def __init__(self, A, b):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m = A.shape[0]
        super().__init__(A, b, m, m, {"SSC": HOLDS, "LTSC": HOLDS, "ASC": HOLDS, "D2g_psd": HOLDS})

    def _value(self, x):
        s = self.slack(x)
        if not np.all(s > 0):
            return math.inf
        return float(-np.log(s).sum())

    def _gradient(self, x):
        st = self._state(x)
        return -st.Ax.sum(axis=0)

    def _metric(self, x):
        st = self._state(x)
        return st.Ax.T @ st.Ax

    def _dmetric(self, x, h):
        st = self._state(x)
        sh = st.Ax @ h
        return -2.0 * st.Ax.T @ (sh[:, None] * st.Ax)

    def _d2metric(self, x, h):
        st = self._state(x)
        sh = st.Ax @ h
        return 6.0 * st.Ax.T @ ((sh**2)[:, None] * st.Ax)


class VaidyaBarrier(_PolytopeBarrier):
    """Hybrid volumetric-logarithmic metric c sqrt(m/d) A_x^T (Sigma + d/m I) A_x.

    The counterpart is c sqrt(m/d) (1/2 log det(A_x^T A_x) + (d/m) phi_log).
    """

    name = "vaidya"
    hessian_metric = False

    def __init__(self, A, b, c: float = 22.0):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, d = A.shape
        if m < d:
            raise ShapeError(f"Vaidya metric needs m >= d, got m={m}, d={d}")
        self.c = float(c)
        self.coef = self.c * math.sqrt(m / d)
        # trace of the diagonal weight is 2d, which bounds the chord length
        super().__init__(A, b, self.coef * 2 * d, self.coef * 2 * d,
                         {"SSC": HOLDS_SCALED, "LTSC": HOLDS_SCALED, "ASC": HOLDS_SCALED})

    def _value(self, x):
        s = self.slack(x)
        if not np.all(s > 0):
            return math.inf
        Ax = self.A / s[:, None]
        m, d = self.A.shape
        _, ld = np.linalg.slogdet(Ax.T @ Ax)
        return self.coef * (0.5 * ld - (d / m) * float(np.log(s).sum()))

    def _gradient(self, x):
        st = self._state(x)
        m, d = self.A.shape
        sigma = leverage_scores(st.Ax).sigma
        return -self.coef * st.Ax.T @ (sigma + d / m)

    def volumetric_hessian(self, x):
        """Exact Hessian of 1/2 log det(A_x^T A_x): A_x^T (3 Sigma - 2 P*P) A_x."""
        st = self._state(x)
        P, sigma = _leverage_parts(st.Ax)
        return st.Ax.T @ ((3.0 * np.diag(sigma) - 2.0 * P * P) @ st.Ax)

    def _metric(self, x):
        st = self._state(x)
        m, d = self.A.shape
        D = leverage_scores(st.Ax).sigma + d / m
        return self.coef * st.Ax.T @ (D[:, None] * st.Ax)

    def _dmetric(self, x, h):
        st = self._state(x)
        m, d = self.A.shape
        P, sigma = _leverage_parts(st.Ax)
        sh = st.Ax @ h
        D = sigma + d / m
        dsig = -2.0 * (sigma * sh - (P * P) @ sh)
        return self.coef * st.Ax.T @ ((-2.0 * D * sh + dsig)[:, None] * st.Ax)

    def _d2metric(self, x, h):
        st = self._state(x)
        m, d = self.A.shape
        P, sigma = _leverage_parts(st.Ax)
        sh = st.Ax @ h
        D = sigma + d / m
        dsig = -2.0 * (sigma * sh - (P * P) @ sh)
        d2sig = _d2_leverage(P, sigma, sh)
        diag = 6.0 * D * sh**2 - 4.0 * dsig * sh + d2sig
        return self.coef * st.Ax.T @ (diag[:, None] * st.Ax)


class LewisBarrier(_PolytopeBarrier):
    """Lewis-weight metric c sqrt(d) A_x^T W_x A_x.

    The counterpart is c sqrt(d) log det(A_x^T W^{1-2/p} A_x) whose gradient
    is -2 c sqrt(d) A_x^T w because the weights are a stationary point.
    """

    name = "lewis"
    hessian_metric = False

    def __init__(self, A, b, p: float | None = None, c: float = 1.0, tol: float = 1e-12):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        m, d = A.shape
        if m < d:
            raise ShapeError(f"Lewis metric needs m >= d, got m={m}, d={d}")
        self.p = default_lewis_p(m) if p is None else float(p)
        self.c = float(c)
        self.tol = tol
        self.coef = self.c * math.sqrt(d)
        super().__init__(A, b, self.coef * d, self.coef * d,
                         {"SSC": UNVERIFIED, "LTSC": UNVERIFIED, "ASC": UNVERIFIED})

    def weights(self, x):
        st = self._state(x)
        return lewis_weights(st.Ax, self.p, self.tol).w

    def _value(self, x):
        s = self.slack(x)
        if not np.all(s > 0):
            return math.inf
        Ax = self.A / s[:, None]
        w = lewis_weights(Ax, self.p, self.tol).w
        _, ld = np.linalg.slogdet(Ax.T @ ((w ** (1.0 - 2.0 / self.p))[:, None] * Ax))
        return self.coef * ld

    def _gradient(self, x):
        st = self._state(x)
        w = lewis_weights(st.Ax, self.p, self.tol).w
        return -2.0 * self.coef * st.Ax.T @ w

    def _metric(self, x):
        st = self._state(x)
        w = lewis_weights(st.Ax, self.p, self.tol).w
        return self.coef * st.Ax.T @ (w[:, None] * st.Ax)

    def _dmetric(self, x, h):
        st = self._state(x)
        w, P = _lewis_parts(st.Ax, self.p, self.tol)
        sh = st.Ax @ h
        dw = _d_lewis(st.Ax, w, P, self.p, sh)
        return self.coef * st.Ax.T @ ((-2.0 * w * sh + dw)[:, None] * st.Ax)

    def _d2metric(self, x, h, eps: float = 1e-5):
        # central difference of the closed-form first derivative
        scale = eps / max(np.linalg.norm(h), 1e-300)
        hp = x + scale * h
        hm = x - scale * h
        return (self._dmetric(hp, h) - self._dmetric(hm, h)) / (2.0 * scale)
