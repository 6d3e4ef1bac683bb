"""Combining metrics: scaling, embedding into a larger space, sums, products."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, FactorizationError, InvalidScale, SingularMetric
from .metric import Array, Barrier, SymPD, combined_amenability


def scale(g: Barrier, c: float) -> Barrier:
    """c * g; parameters scale by c and property flags are preserved."""
    if not c >= 1:
        raise InvalidScale(f"scaling factor must be >= 1, got {c}")
    return g.with_scaling(c)


class Embedded(Barrier):
    """P^T g(P y) P where P selects ``index`` from an ambient vector."""

    def __init__(self, base: Barrier, index, ambient_dim: int):
        index = np.asarray(index, dtype=int).ravel()
        if index.size != base.dim:
            raise DimensionError(f"{base.name}: projection has {index.size} indices, barrier needs {base.dim}")
        if index.size and (index.min() < 0 or index.max() >= ambient_dim):
            raise DimensionError(f"{base.name}: projection index out of range for ambient dim {ambient_dim}")
        if np.unique(index).size != index.size:
            raise DimensionError(f"{base.name}: projection indices are not distinct")
        self.base = base
        self.index = index
        self._grid = np.ix_(index, index)
        super().__init__(ambient_dim, base.nu, base.nu_bar, dict(base.flags))
        self.name = base.name
        self.hessian_metric = base.hessian_metric

    def _scatter(self, M):
        out = np.zeros((self.dim, self.dim))
        out[self._grid] = M
        return out

    def in_domain(self, y):
        return self.base.in_domain(np.asarray(y)[self.index])

    def _value(self, y):
        return self.base.value(y[self.index])

    def _gradient(self, y):
        out = np.zeros(self.dim)
        out[self.index] = self.base.gradient(y[self.index])
        return out

    def _metric(self, y):
        return self._scatter(self.base.metric(y[self.index]))

    def _dmetric(self, y, h):
        return self._scatter(self.base.dmetric(y[self.index], h[self.index]))

    def _d2metric(self, y, h):
        return self._scatter(self.base.d2metric(y[self.index], h[self.index]))

    @property
    def has_d2metric(self):
        return self.base.has_d2metric

    def describe(self):
        out = self.base.describe()
        out["coordinates"] = self.index.tolist()
        return out


def embed(g: Barrier, proj, ambient_dim: int) -> Embedded:
    return Embedded(g, proj, ambient_dim)


class CompositeMetric(Barrier):
    """k * sum_i P_i^T g_i(P_i y) P_i with k the number of parts (or a given prefactor)."""

    name = "composite"

    def __init__(self, parts, prefactor: float | None = None):
        parts = list(parts)
        if not parts:
            raise ValueError("composite needs at least one part")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionError(f"parts have different ambient dimensions {sorted(dims)}")
        self.parts = parts
        self.prefactor = float(len(parts) if prefactor is None else prefactor)
        nu = self.prefactor * sum(p.nu for p in parts)
        nu_bar = self.prefactor * sum(p.nu_bar for p in parts)
        super().__init__(dims.pop(), nu, nu_bar, {})
        self.hessian_metric = all(p.hessian_metric for p in parts)
        covered = np.zeros(self.dim, dtype=bool)
        for p in parts:
            covered[p.index if isinstance(p, Embedded) else slice(None)] = True
        if not covered.all():
            raise SingularMetric(
                f"coordinates {np.flatnonzero(~covered).tolist()} are not covered by any barrier; "
                "the domain contains a straight line"
            )

    @property
    def k(self) -> float:
        return self.prefactor

    def in_domain(self, y):
        y = np.asarray(y, dtype=float)
        return all(p.in_domain(y) for p in self.parts)

    def _value(self, y):
        total = 0.0
        for p in self.parts:
            v = p.value(y)
            if not np.isfinite(v):
                return math.inf
            total += v
        return self.prefactor * total

    def _gradient(self, y):
        return self.prefactor * sum(p.gradient(y) for p in self.parts)

    def _metric(self, y):
        out = np.zeros((self.dim, self.dim))
        for p in self.parts:
            if isinstance(p, Embedded):
                out[p._grid] += p.base.metric(y[p.index])
            else:
                out += p.metric(y)
        out *= self.prefactor
        return out

    def _dmetric(self, y, h):
        return self.prefactor * sum(p.dmetric(y, h) for p in self.parts)

    def _d2metric(self, y, h):
        return self.prefactor * sum(p.d2metric(y, h) for p in self.parts)

    @property
    def has_d2metric(self):
        return all(p.has_d2metric for p in self.parts)

    def local(self, y):
        if len(self.parts) == 1 and self.prefactor == 1.0:
            part = self.parts[0]
            base = part.base if isinstance(part, Embedded) else part
            if isinstance(part, Embedded) and np.array_equal(part.index, np.arange(self.dim)):
                return base.local(np.asarray(y)[part.index])
        return SymPD(self.metric(y), check=False)

    def check_pd(self, y) -> SymPD:
        g = SymPD(self.metric(y), check=False)
        try:
            g.chol
        except FactorizationError as exc:
            raise SingularMetric("composite metric is singular; the domain contains a straight line") from exc
        return g

    def describe(self):
        return {
            "name": self.name,
            "dim": self.dim,
            "prefactor": self.prefactor,
            "nu": self.nu,
            "nu_bar": self.nu_bar,
            "parts": [p.describe() for p in self.parts],
        }


def metric_sum(parts) -> CompositeMetric:
    """Sum of embedded parts with prefactor equal to the part count."""
    parts = list(parts)
    comp = CompositeMetric(parts)
    assert (comp.nu, comp.nu_bar) == combined_amenability(parts)
    return comp


def direct_product(parts) -> CompositeMetric:
    """Block-diagonal product of barriers on disjoint coordinate blocks.

    ``parts`` is a list of (barrier, block_indices).  Each block is scaled by
    its own dimension and no overall prefactor is applied.
    """
    parts = list(parts)
    index_sets = [np.asarray(ix, dtype=int).ravel() for _, ix in parts]
    allidx = np.concatenate(index_sets) if index_sets else np.zeros(0, dtype=int)
    if np.unique(allidx).size != allidx.size:
        raise DimensionError("direct product blocks overlap")
    ambient = int(allidx.size)
    if ambient and (allidx.min() != 0 or allidx.max() != ambient - 1):
        raise DimensionError("direct product blocks must partition the coordinates")
    emb = [Embedded(b.with_scaling(max(1, len(ix))), ix, ambient) for (b, _), ix in zip(parts, index_sets)]
    comp = CompositeMetric(emb, prefactor=1.0)
    comp.name = "direct-product"
    return comp
