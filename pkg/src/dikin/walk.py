"""Metropolis-filtered Dikin walk.

From x the walk proposes z ~ N(x, (r^2/d) g(x)^{-1}) and accepts with the
Metropolis-Hastings probability for that Gaussian kernel, so the chain is
reversible for exp(-V).  With probability ``laziness`` it stays put.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import FactorizationError, NotInterior
from .metric import Array, Barrier

R0 = 0.3


def default_radius(beta: float, r0: float = R0) -> float:
    """r0 * min(1, beta^{-1/2})."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    return r0 if beta <= 1.0 else r0 / math.sqrt(beta)


@dataclass
class WalkConfig:
    r: float = R0
    laziness: float = 0.5
    n_steps: int = 1000
    thin: int = 1
    seed: int | None = None
    allow_large_r: bool = False

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError("step radius must be nonnegative")
        if self.r > 1 and not self.allow_large_r:
            raise ValueError("step radius above 1 needs allow_large_r=True")
        if not 0 <= self.laziness <= 1:
            raise ValueError("laziness must lie in [0, 1]")
        if self.n_steps < 1 or self.thin < 1:
            raise ValueError("n_steps and thin must be positive")


@dataclass
class WalkState:
    x: Array
    geom: object  # factorized metric at x (SymPD or PsdMetricState)
    V: float
    metric: Barrier
    potential: Callable[[Array], float]
    rng: np.random.Generator
    n_steps: int = 0
    n_proposed: int = 0
    n_accepted: int = 0
    extras: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.x.size

    @property
    def acceptance_rate(self) -> float:
        return self.n_accepted / self.n_proposed if self.n_proposed else float("nan")


def init_state(x0: Array, potential, metric: Barrier, rng: np.random.Generator | int | None = None) -> WalkState:
    x0 = np.array(x0, dtype=float)
    if not metric.in_domain(x0):
        raise NotInterior("starting point is not strictly interior")
    V = potential(x0)
    if not np.isfinite(V):
        raise NotInterior("potential is infinite at the starting point")
    geom = metric.local(x0)
    geom.logdet  # factorize once so failures surface here
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    return WalkState(x=x0, geom=geom, V=V, metric=metric, potential=potential, rng=rng)


def propose(state: WalkState, r: float, rng: np.random.Generator | None = None) -> Array:
    rng = state.rng if rng is None else rng
    return state.x + (r / math.sqrt(state.dim)) * state.geom.draw(rng)


def _log_kernel(geom, frm: Array, to: Array, r: float, d: int) -> float:
    """log p_frm(to) up to the common constant -d/2 log(2 pi r^2/d)."""
    v = to - frm
    return 0.5 * geom.logdet - (d / (2.0 * r * r)) * geom.quad(v)


def _evaluate(state: WalkState, z: Array, r: float):
    """(log acceptance ratio, geometry at z, V(z)); log ratio is -inf when infeasible."""
    if not state.metric.in_domain(z):
        return -math.inf, None, math.inf
    Vz = state.potential(z)
    if not np.isfinite(Vz):
        return -math.inf, None, math.inf
    try:
        gz = state.metric.local(z)
        gz.logdet
    except (NotInterior, FactorizationError):
        return -math.inf, None, math.inf
    d = state.dim
    log_r = (_log_kernel(gz, z, state.x, r, d) - _log_kernel(state.geom, state.x, z, r, d)
             + state.V - Vz)
    return log_r, gz, Vz


def acceptance_ratio(state: WalkState, z: Array, r: float) -> float:
    """min(1, p_z(x) pi(z) / (p_x(z) pi(x))); 0 for infeasible z."""
    log_r, _, _ = _evaluate(state, np.asarray(z, dtype=float), r)
    return 1.0 if log_r >= 0 else math.exp(log_r)


def transition_log_density(metric: Barrier, potential, x: Array, z: Array, r: float) -> float:
    """log of A_x(z) p_x(z), the off-diagonal part of the transition kernel (non-lazy)."""
    st = init_state(x, potential, metric, 0)
    d = st.dim
    log_r, _, _ = _evaluate(st, np.asarray(z, dtype=float), r)
    const = -0.5 * d * math.log(2.0 * math.pi * r * r / d)
    return const + _log_kernel(st.geom, st.x, np.asarray(z, dtype=float), r, d) + min(0.0, log_r)


def step(state: WalkState, cfg: WalkConfig) -> WalkState:
    """One lazy Metropolis step, mutating and returning ``state``."""
    rng = state.rng
    state.n_steps += 1
    if cfg.laziness > 0 and rng.random() < cfg.laziness:
        return state
    z = propose(state, cfg.r, rng)
    state.n_proposed += 1
    log_r, gz, Vz = _evaluate(state, z, cfg.r)
    if log_r >= 0 or rng.random() < math.exp(log_r):
        state.x, state.geom, state.V = z, gz, Vz
        state.n_accepted += 1
    return state


def run(x0: Array, potential, metric: Barrier, cfg: WalkConfig, rng=None, callback=None,
        state: WalkState | None = None):
    """Run cfg.n_steps steps and return (samples, final state).

    ``samples`` holds every ``thin``-th state.  ``callback(i, state)`` is
    called after each recorded sample.  Passing ``state`` continues an
    existing chain and ignores x0.
    """
    if state is None:
        state = init_state(x0, potential, metric, cfg.seed if rng is None else rng)
    n_out = cfg.n_steps // cfg.thin
    out = np.empty((n_out, state.dim))
    k = 0
    for i in range(1, cfg.n_steps + 1):
        step(state, cfg)
        if i % cfg.thin == 0 and k < n_out:
            out[k] = state.x
            if callback is not None:
                callback(k, state)
            k += 1
    return out, state
