"""Problem descriptions and the reduction to a linear-cost (exponential) target.

A ``ProblemSpec`` describes exp(-sum f_i(x)) restricted to an intersection of
constraint sets.  ``reduce`` moves every non-linear potential into an
epigraph constraint over fresh variables, so that the reduced target is
exp(-c^T y) on the augmented body.  The x block always comes first and the
epigraph variables follow in potential-declaration order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import CompositeMetric, Embedded
from .errors import DimensionError, ShapeError, UnsupportedTerm
from .linear import LewisBarrier, LogBarrier, VaidyaBarrier
from .metric import Array, Barrier
from .psd import PSDBarrier, SvecCodec, TruncatedPSDBarrier
from .structured import (
    ellipsoid_barrier,
    entropy_barrier,
    exp_epigraph_barrier,
    gaussian_epigraph_barrier,
    log_epigraph_barrier,
    power_barrier,
    soc_barrier,
)

# -- constraint terms ---------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """{x : A x >= b}; ``metric`` is one of log, vaidya, lewis."""

    A: Array
    b: Array
    metric: str = "log"

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        if A.shape[0] != b.size:
            raise ShapeError("Linear: A and b have inconsistent row counts")
        if np.any(np.all(A == 0, axis=1)):
            raise ShapeError("Linear: A has an all-zero row")
        if self.metric not in ("log", "vaidya", "lewis"):
            raise UnsupportedTerm(f"Linear: unknown metric {self.metric!r}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    def contains(self, x: Array) -> bool:
        return bool(np.all(self.A @ x - self.b > 0))


@dataclass(frozen=True)
class Ellipsoid:
    """{x : 1/2 x^T Q x + p^T x + l <= 0}."""

    Q: Array
    p: Array
    l: float

    def __post_init__(self):
        object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float).ravel())
        object.__setattr__(self, "l", float(self.l))

    def contains(self, x: Array) -> bool:
        return bool(0.5 * x @ self.Q @ x + self.p @ x + self.l < 0)


@dataclass(frozen=True)
class PSDCone:
    """svec(X) occupies coordinates offset .. offset + n(n+1)/2 - 1 and X must be PD."""

    n: int
    offset: int = 0

    @property
    def size(self) -> int:
        return self.n * (self.n + 1) // 2

    @property
    def index(self) -> Array:
        return np.arange(self.offset, self.offset + self.size)

    def matrix(self, x: Array) -> Array:
        return SvecCodec(self.n).mat(np.asarray(x)[self.index])

    def contains(self, x: Array) -> bool:
        try:
            np.linalg.cholesky(self.matrix(x))
        except np.linalg.LinAlgError:
            return False
        return True


# -- potential terms ----------------------------------------------------------


def _sel(index, d):
    return np.arange(d) if index is None else np.asarray(index, dtype=int).ravel()


@dataclass(frozen=True)
class LinearPotential:
    c: Array

    def value(self, x):
        return float(np.asarray(self.c, dtype=float) @ x)


@dataclass(frozen=True)
class QuadraticPotential:
    """1/2 (x - mu)^T Sigma (x - mu)."""

    Sigma: Array
    mu: Array

    def value(self, x):
        z = x - np.asarray(self.mu, dtype=float)
        return float(0.5 * z @ np.asarray(self.Sigma, dtype=float) @ z)


@dataclass(frozen=True)
class NormPotential:
    """sqrt((x - mu)^T Sigma (x - mu))."""

    Sigma: Array
    mu: Array

    def value(self, x):
        z = x - np.asarray(self.mu, dtype=float)
        return float(math.sqrt(max(z @ np.asarray(self.Sigma, dtype=float) @ z, 0.0)))


@dataclass(frozen=True)
class EntropyPotential:
    """sum x_i log x_i over the selected coordinates (all when index is None)."""

    index: tuple | None = None

    def value(self, x):
        z = x[_sel(self.index, x.size)]
        return float(np.sum(z * np.log(z))) if np.all(z > 0) else math.inf


@dataclass(frozen=True)
class PowerPotential:
    """sum |x_i|^p."""

    p: float = 2.0
    index: tuple | None = None

    def value(self, x):
        return float(np.sum(np.abs(x[_sel(self.index, x.size)]) ** self.p))


@dataclass(frozen=True)
class LogPotential:
    """-sum log x_i."""

    index: tuple | None = None

    def value(self, x):
        z = x[_sel(self.index, x.size)]
        return float(-np.sum(np.log(z))) if np.all(z > 0) else math.inf


@dataclass(frozen=True)
class ExpPotential:
    """sum exp(x_i)."""

    index: tuple | None = None

    def value(self, x):
        return float(np.sum(np.exp(x[_sel(self.index, x.size)])))


@dataclass(frozen=True)
class LogDetPotential:
    """-log det X for the PSD block starting at ``offset``."""

    n: int
    offset: int = 0

    def value(self, x):
        X = SvecCodec(self.n).mat(x[self.offset : self.offset + self.n * (self.n + 1) // 2])
        try:
            L = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            return math.inf
        return -2.0 * float(np.log(np.diag(L)).sum())


CONSTRAINT_KINDS = (Linear, Ellipsoid, PSDCone)
POTENTIAL_KINDS = (
    LinearPotential, QuadraticPotential, NormPotential, EntropyPotential,
    PowerPotential, LogPotential, ExpPotential, LogDetPotential,
)


@dataclass(frozen=True)
class ProblemSpec:
    dim: int
    constraints: tuple = ()
    potentials: tuple = ()
    bounding_box: Array | None = None  # (dim, 2) array of [lo, hi], optional
    hint: Array | None = None  # optional strictly feasible x

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "potentials", tuple(self.potentials))
        if self.dim < 1:
            raise DimensionError("dimension must be positive")
        for c in self.constraints:
            if not isinstance(c, CONSTRAINT_KINDS):
                raise UnsupportedTerm(f"unsupported constraint {type(c).__name__}")
            if isinstance(c, Linear) and c.A.shape[1] != self.dim:
                raise DimensionError(f"Linear constraint has {c.A.shape[1]} columns, expected {self.dim}")
            if isinstance(c, Ellipsoid) and c.Q.shape != (self.dim, self.dim):
                raise DimensionError("Ellipsoid Q has the wrong shape")
            if isinstance(c, PSDCone) and c.offset + c.size > self.dim:
                raise DimensionError("PSDCone block exceeds the ambient dimension")
        for p in self.potentials:
            if not isinstance(p, POTENTIAL_KINDS):
                raise UnsupportedTerm(f"unsupported potential {type(p).__name__}")

    def contains(self, x: Array) -> bool:
        x = np.asarray(x, dtype=float)
        return all(c.contains(x) for c in self.constraints)

    def potential(self, x: Array) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(p.value(x) for p in self.potentials))

    def log_density(self, x: Array) -> float:
        """Unnormalized log density, -inf outside the body."""
        if not self.contains(x):
            return -math.inf
        v = self.potential(x)
        return -v if np.isfinite(v) else -math.inf


# -- reduction ----------------------------------------------------------------


class ResidualLogDet:
    """-log det X kept as an explicit potential term on the reduced space."""

    def __init__(self, n: int, index: Array, ambient: int):
        self.barrier = PSDBarrier(n, scaling=1.0)
        self.index = index
        self.ambient = ambient

    def value(self, y):
        return self.barrier.value(y[self.index])

    def gradient(self, y):
        out = np.zeros(self.ambient)
        out[self.index] = self.barrier.gradient(y[self.index])
        return out

    def hessian(self, y):
        out = np.zeros((self.ambient, self.ambient))
        out[np.ix_(self.index, self.index)] = self.barrier.metric(y[self.index])
        return out


@dataclass
class ReducedProblem:
    spec: ProblemSpec
    dim: int
    x_dim: int
    c: Array
    parts: list  # [(Barrier, index array)]
    residuals: list = field(default_factory=list)
    epigraphs: list = field(default_factory=list)  # [(potential, x index, t index)]
    beta_f: float = 0.0  # smoothness of the residual potential relative to phi
    alpha_f: float = 0.0

    _composite: CompositeMetric | None = None

    @property
    def composite(self) -> CompositeMetric:
        if self._composite is None:
            self._composite = CompositeMetric([Embedded(b, ix, self.dim) for b, ix in self.parts])
        return self._composite

    @property
    def n_epigraph(self) -> int:
        return self.dim - self.x_dim

    def f(self, y: Array) -> float:
        v = float(self.c @ y)
        for r in self.residuals:
            v += r.value(y)
        return v

    def f_gradient(self, y: Array) -> Array:
        g = self.c.copy()
        for r in self.residuals:
            g = g + r.gradient(y)
        return g

    def f_hessian(self, y: Array) -> Array:
        H = np.zeros((self.dim, self.dim))
        for r in self.residuals:
            H = H + r.hessian(y)
        return H

    def project(self, y: Array) -> Array:
        return project_sample(self, y)

    def augment(self, x: Array, margin: float = 1.0) -> Array:
        """Lift x to (x, t) with every epigraph variable set to f_i(x) + margin."""
        x = np.asarray(x, dtype=float)
        if x.size != self.x_dim:
            raise DimensionError(f"expected {self.x_dim} coordinates, got {x.size}")
        y = np.zeros(self.dim)
        y[: self.x_dim] = x
        for pot, xi, ti in self.epigraphs:
            y[ti] = _epigraph_values(pot, x[xi]) + margin
        return y

    def describe(self) -> dict:
        comp = self.composite
        return {
            "dim": self.dim,
            "x_dim": self.x_dim,
            "c": self.c.tolist(),
            "prefactor": comp.prefactor,
            "nu": comp.nu,
            "nu_bar": comp.nu_bar,
            "parts": [p.describe() for p in comp.parts],
        }


def _epigraph_values(pot, z):
    if isinstance(pot, QuadraticPotential):
        return pot.value(z)
    if isinstance(pot, NormPotential):
        return pot.value(z)
    if isinstance(pot, EntropyPotential):
        return z * np.log(z)
    if isinstance(pot, PowerPotential):
        return np.abs(z) ** pot.p
    if isinstance(pot, LogPotential):
        return -np.log(z)
    if isinstance(pot, ExpPotential):
        return np.exp(z)
    raise UnsupportedTerm(type(pot).__name__)


_SEPARABLE = {
    EntropyPotential: entropy_barrier,
    LogPotential: log_epigraph_barrier,
    ExpPotential: exp_epigraph_barrier,
}


def _linear_barrier(c: Linear) -> Barrier:
    if c.metric == "vaidya":
        return VaidyaBarrier(c.A, c.b)
    if c.metric == "lewis":
        return LewisBarrier(c.A, c.b)
    return LogBarrier(c.A, c.b)


def _fast_psd_candidate(spec: ProblemSpec):
    """A single PSD block covering x, log-barrier linear constraints and linear cost only."""
    cones = [c for c in spec.constraints if isinstance(c, PSDCone)]
    if len(cones) != 1 or cones[0].offset != 0 or cones[0].size != spec.dim:
        return None
    others = [c for c in spec.constraints if not isinstance(c, PSDCone)]
    if not others or not all(isinstance(c, Linear) and c.metric == "log" for c in others):
        return None
    if not all(isinstance(p, LinearPotential) for p in spec.potentials):
        return None
    return cones[0], others


def reduce(spec: ProblemSpec, psd_fast_path: bool = True) -> ReducedProblem:
    """Reduce a structured problem to exp(-c^T y) on an augmented body."""
    if isinstance(spec, ReducedProblem):
        raise UnsupportedTerm("problem is already reduced")
    d = spec.dim
    c_x = np.zeros(d)
    pending = []  # (potential, x index, number of new variables)
    logdets = []
    for pot in spec.potentials:
        if isinstance(pot, LinearPotential):
            cv = np.asarray(pot.c, dtype=float).ravel()
            if cv.size != d:
                raise DimensionError("LinearPotential has the wrong length")
            c_x += cv
        elif isinstance(pot, (QuadraticPotential, NormPotential)):
            pending.append((pot, np.arange(d), 1))
        elif type(pot) in _SEPARABLE or isinstance(pot, PowerPotential):
            ix = _sel(pot.index, d)
            pending.append((pot, ix, ix.size))
        elif isinstance(pot, LogDetPotential):
            logdets.append(pot)
        else:
            raise UnsupportedTerm(f"unsupported potential {type(pot).__name__}")

    total = d + sum(k for _, _, k in pending)
    c = np.concatenate([c_x, np.ones(total - d)])
    n_parts = len(spec.constraints) + len(pending)
    parts = []

    fast = _fast_psd_candidate(spec) if psd_fast_path else None
    if fast is not None and not logdets:
        cone, lins = fast
        A = np.vstack([l.A for l in lins])
        b = np.concatenate([l.b for l in lins])
        # rows of A act on svec coordinates; convert them to symmetric matrices
        codec = SvecCodec(cone.n)
        Amats = []
        for row in A:
            Ai = codec.mat(row)
            Ai[codec.cols[codec.offdiag], codec.rows[codec.offdiag]] *= 0.5
            Ai[codec.rows[codec.offdiag], codec.cols[codec.offdiag]] *= 0.5
            Amats.append(Ai)
        bar = TruncatedPSDBarrier(cone.n, np.array(Amats), b, kind="log",
                                  psd_scaling=codec.ds, prefactor=float(n_parts))
        bar.lin = LogBarrier(A, b)  # exact rows, bypassing the matrix round trip
        parts.append((bar, cone.index))
        red = ReducedProblem(spec, total, d, c, parts)
        red._composite = CompositeMetric([Embedded(bar, cone.index, total)], prefactor=1.0)
        return red

    for con in spec.constraints:
        if isinstance(con, Linear):
            parts.append((_linear_barrier(con), np.arange(d)))
        elif isinstance(con, Ellipsoid):
            parts.append((ellipsoid_barrier(con.Q, con.p, con.l), np.arange(d)))
        elif isinstance(con, PSDCone):
            scaling = SvecCodec(con.n).ds if n_parts > 1 else con.n
            parts.append((PSDBarrier(con.n, scaling=scaling), con.index))

    epigraphs = []
    nxt = d
    for pot, ix, k in pending:
        tix = np.arange(nxt, nxt + k)
        nxt += k
        if isinstance(pot, QuadraticPotential):
            bar = gaussian_epigraph_barrier(pot.Sigma, pot.mu)
        elif isinstance(pot, NormPotential):
            bar = soc_barrier(pot.Sigma, pot.mu)
        elif isinstance(pot, PowerPotential):
            bar = power_barrier(k, pot.p)
        else:
            bar = _SEPARABLE[type(pot)](k)
        parts.append((bar, np.concatenate([ix, tix])))
        epigraphs.append((pot, ix, tix))

    residuals = []
    beta_f = 0.0
    for pot in logdets:
        cones = [p for p in spec.constraints if isinstance(p, PSDCone) and p.n == pot.n and p.offset == pot.offset]
        if not cones:
            raise UnsupportedTerm("LogDetPotential needs a PSDCone over the same block")
        residuals.append(ResidualLogDet(pot.n, cones[0].index, total))
        # hess(-log det) equals the unscaled PSD part, which enters g with weight k * scaling
        psd_weight = n_parts * (SvecCodec(pot.n).ds if n_parts > 1 else pot.n)
        beta_f += 1.0 / psd_weight

    if not parts:
        raise UnsupportedTerm("problem has no constraints or epigraph terms; the body is unbounded")
    return ReducedProblem(spec, total, d, c, parts, residuals, epigraphs, beta_f=beta_f)


def project_sample(red: ReducedProblem, y: Array) -> Array:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != red.dim:
        raise DimensionError(f"expected {red.dim} coordinates, got {y.shape[-1]}")
    return y[..., : red.x_dim].copy()


def augment(red: ReducedProblem, x: Array, margin: float = 1.0) -> Array:
    return red.augment(x, margin)
