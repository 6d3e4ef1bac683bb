"""Local-metric abstraction shared by every barrier.

A barrier object evaluates a positive-definite matrix field g(x) together
with a convex counterpart phi(x) that blows up at the boundary.  Scaling is
folded into the public evaluators so that composite metrics can treat every
part uniformly.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.linalg import solve_triangular

from .errors import FactorizationError, MissingParameter, NotInterior

Array = npt.NDArray[np.float64]

HOLDS = "holds"
HOLDS_SCALED = "holds-after-declared-scaling"
UNVERIFIED = "unverified"


def symmetry_fallback(nu: float) -> float:
    """Symmetry parameter implied by self-concordance alone: (nu + 2 sqrt(nu))^2."""
    return (nu + 2.0 * math.sqrt(nu)) ** 2


class SymPD:
    """Symmetric positive-definite matrix with a cached Cholesky factor."""

    __slots__ = ("matrix", "_chol", "_logdet")

    def __init__(self, matrix: Array, check: bool = True):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise FactorizationError(f"expected a square matrix, got shape {matrix.shape}")
        if check:
            scale = max(np.abs(matrix).max(), 1e-300)
            if np.abs(matrix - matrix.T).max() > 1e-12 * scale:
                raise FactorizationError("matrix is not symmetric")
        self.matrix = matrix
        self._chol = None
        self._logdet = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def chol(self) -> Array:
        if self._chol is None:
            try:
                self._chol = np.linalg.cholesky(self.matrix)
            except np.linalg.LinAlgError as exc:
                raise FactorizationError("metric is not positive definite") from exc
        return self._chol

    @property
    def logdet(self) -> float:
        if self._logdet is None:
            self._logdet = 2.0 * float(np.log(np.diag(self.chol)).sum())
        return self._logdet

    def quad(self, v: Array) -> float:
        """v^T g v."""
        return float(v @ self.matrix @ v)

    def solve(self, v: Array) -> Array:
        L = self.chol
        y = solve_triangular(L, v, lower=True, check_finite=False)
        return solve_triangular(L.T, y, lower=False, check_finite=False)

    def inv_sqrt_apply(self, xi: Array) -> Array:
        """Return L^{-T} xi, a vector with covariance g^{-1} when xi ~ N(0, I)."""
        return solve_triangular(self.chol.T, xi, lower=False, check_finite=False)

    def draw(self, rng: np.random.Generator) -> Array:
        return self.inv_sqrt_apply(rng.standard_normal(self.dim))


def as_sympd(g) -> SymPD:
    return g if isinstance(g, SymPD) else SymPD(g)


def local_norm(g, v: Array) -> float:
    """sqrt(v^T g v) for a positive-definite g."""
    g = as_sympd(g)
    g.chol  # raises FactorizationError for non-PD input
    return math.sqrt(max(g.quad(np.asarray(v, dtype=float)), 0.0))


@dataclass(frozen=True)
class DikinEllipsoid:
    center: Array
    metric: SymPD
    radius: float


def in_dikin(e: DikinEllipsoid, y: Array) -> bool:
    return local_norm(e.metric, np.asarray(y, dtype=float) - e.center) <= e.radius


def combined_amenability(parts) -> tuple[float, float]:
    """Parameters of k * sum(parts) where k is the number of parts."""
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one part")
    for p in parts:
        if getattr(p, "nu", None) is None or getattr(p, "nu_bar", None) is None:
            raise MissingParameter(f"part {getattr(p, 'name', p)!r} has no nu/nu_bar")
    k = len(parts)
    return k * sum(p.nu for p in parts), k * sum(p.nu_bar for p in parts)


class Barrier:
    """Base class for metric descriptors.

    Subclasses implement the unscaled evaluators ``_value``, ``_gradient``,
    ``_metric``, ``_dmetric`` and optionally ``_d2metric``.  The public
    methods multiply by ``scaling``.  ``_value`` must return ``inf`` outside
    the open domain; the matrix evaluators raise ``NotInterior`` there.

    ``hessian_metric`` is true when g equals scaling times the Hessian of phi
    exactly; otherwise g is only spectrally comparable to it.
    """

    name = "barrier"
    hessian_metric = True

    def __init__(self, dim: int, nu: float, nu_bar: float, flags: dict | None = None):
        self.dim = int(dim)
        self.nu_raw = float(nu)
        self.nu_bar_raw = float(nu_bar)
        self.scaling = 1.0
        self.flags = dict(flags or {})

    # -- raw evaluators -------------------------------------------------
    def _value(self, x: Array) -> float:
        raise NotImplementedError

    def _gradient(self, x: Array) -> Array:
        raise NotImplementedError

    def _metric(self, x: Array) -> Array:
        raise NotImplementedError

    def _dmetric(self, x: Array, h: Array) -> Array:
        raise NotImplementedError

    def _d2metric(self, x: Array, h: Array) -> Array:
        raise NotImplementedError

    # -- public evaluators ----------------------------------------------
    @property
    def nu(self) -> float:
        return self.scaling * self.nu_raw

    @property
    def nu_bar(self) -> float:
        return self.scaling * self.nu_bar_raw

    def in_domain(self, x: Array) -> bool:
        return bool(np.isfinite(self._value(np.asarray(x, dtype=float))))

    def value(self, x: Array) -> float:
        v = self._value(np.asarray(x, dtype=float))
        return self.scaling * v if np.isfinite(v) else math.inf

    def gradient(self, x: Array) -> Array:
        return self.scaling * self._gradient(np.asarray(x, dtype=float))

    def metric(self, x: Array) -> Array:
        return self.scaling * self._metric(np.asarray(x, dtype=float))

    def dmetric(self, x: Array, h: Array) -> Array:
        return self.scaling * self._dmetric(np.asarray(x, dtype=float), np.asarray(h, dtype=float))

    def d2metric(self, x: Array, h: Array) -> Array:
        return self.scaling * self._d2metric(np.asarray(x, dtype=float), np.asarray(h, dtype=float))

    @property
    def has_d2metric(self) -> bool:
        return type(self)._d2metric is not Barrier._d2metric

    def local(self, x: Array) -> SymPD:
        """Factorized metric at x, used by the walk."""
        return SymPD(self.metric(x), check=False)

    def logdet(self, x: Array) -> float:
        return self.local(x).logdet

    def with_scaling(self, c: float) -> "Barrier":
        out = copy.copy(self)
        out.flags = dict(self.flags)
        out.scaling = self.scaling * float(c)
        return out

    def require_interior(self, x: Array) -> None:
        if not self.in_domain(x):
            raise NotInterior(f"{self.name}: point is not strictly interior")

    def describe(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "scaling": self.scaling,
            "nu": self.nu,
            "nu_bar": self.nu_bar,
            "flags": dict(self.flags),
        }

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} dim={self.dim} scaling={self.scaling:g}>"
