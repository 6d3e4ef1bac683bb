"""Gaussian cooling driver for the Dikin walk.

Starting near the minimizer of (nu/d) f + phi, the chain follows the family
exp(-V_{sigma^2}) with

    V = ((nu/d) f + phi) / sigma^2   while sigma^2 <= nu/d,
    V = f + phi / sigma^2            afterwards,

increasing sigma^2 geometrically until the barrier term is negligible, and
finishes with a walk on exp(-f) itself.  One chain is carried through every
stage so that each stage warm-starts the next.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, NeedFeasiblePoint, NotInterior, SamplingError
from .metric import Array
from .model import (
    Ellipsoid,
    EntropyPotential,
    Linear,
    LogPotential,
    PSDCone,
    ProblemSpec,
    ReducedProblem,
    _sel,
)
from .psd import SvecCodec
from .walk import WalkConfig, WalkState, default_radius, init_state, step

SIGMA0_NUMERATOR = 1e-5
C_INNER = 50
PHASE1_MAX_ATTEMPTS = 1_000_000


def sigma0_sq(d: int) -> float:
    """Initial variance 1e-5 / d^3."""
    return SIGMA0_NUMERATOR / d**3


@dataclass(frozen=True)
class CoolingSchedule:
    sigma2: float
    nu: float
    d: int
    phase: int = 1

    @property
    def nu_over_d(self) -> float:
        return self.nu / self.d

    @property
    def done(self) -> bool:
        return self.sigma2 > self.nu


def _phase_of(sigma2: float, nu: float, d: int) -> int:
    if sigma2 <= nu / d:
        return 2
    if sigma2 <= nu:
        return 3
    return 4


def initial_schedule(nu: float, d: int) -> CoolingSchedule:
    return CoolingSchedule(sigma0_sq(d), float(nu), int(d), 1)


def advance_sigma(s: CoolingSchedule) -> CoolingSchedule:
    """sigma^2 (1 + 1/sqrt d) while sigma^2 <= nu/d, then sigma^2 (1 + sigma/sqrt nu)."""
    if s.sigma2 <= s.nu_over_d:
        new = s.sigma2 * (1.0 + 1.0 / math.sqrt(s.d))
    elif s.sigma2 <= s.nu:
        new = s.sigma2 * (1.0 + math.sqrt(s.sigma2) / math.sqrt(s.nu))
    else:
        raise ValueError("schedule already finished")
    return replace(s, sigma2=new, phase=_phase_of(new, s.nu, s.d))


def phase2_step_count(nu: float, d: int) -> int:
    """Number of phase-2 updates needed to go from sigma_0^2 past nu/d."""
    s0 = sigma0_sq(d)
    if nu / d < s0:
        return 0
    return math.ceil(math.log(nu / (d * s0)) / math.log(1.0 + 1.0 / math.sqrt(d)))


def full_schedule(nu: float, d: int) -> list[CoolingSchedule]:
    """Every schedule state from sigma_0^2 until sigma^2 exceeds nu."""
    s = initial_schedule(nu, d)
    out = [s]
    while not s.done:
        s = advance_sigma(s)
        out.append(s)
    return out


def relative_bounds(s: CoolingSchedule, alpha_f: float = 0.0, beta_f: float = 0.0) -> tuple[float, float]:
    """(alpha, beta) of V_{sigma^2} relative to the composite barrier."""
    if s.phase == 4:
        return alpha_f, beta_f
    if s.phase <= 2 and s.sigma2 <= s.nu_over_d:
        k = s.nu_over_d
        return (k * alpha_f + 1.0) / s.sigma2, (k * beta_f + 1.0) / s.sigma2
    return alpha_f + 1.0 / s.sigma2, beta_f + 1.0 / s.sigma2


# -- analytic center ----------------------------------------------------------


def analytic_center(phi, f=None, hint: Array | None = None, fbar_scale: float = 1.0, tol: float = 1e-8,
                    max_iter: int = 500, armijo: float = 0.25, shrink: float = 0.5) -> Array:
    """Minimize fbar_scale * f + phi by damped Newton with backtracking.

    ``phi`` is a barrier object (value, gradient, metric used as Hessian).
    ``f`` is either None or an object with ``f``, ``f_gradient``, ``f_hessian``
    (a ReducedProblem qualifies).
    """
    if hint is None:
        raise NeedFeasiblePoint("analytic center needs a strictly feasible starting point")
    y = np.array(hint, dtype=float)
    if not phi.in_domain(y):
        raise NeedFeasiblePoint("starting point is not strictly feasible")

    def F(z):
        v = phi.value(z)
        if not np.isfinite(v):
            return math.inf
        return v + (fbar_scale * f.f(z) if f is not None else 0.0)

    Fy = F(y)
    for _ in range(max_iter):
        grad = phi.gradient(y)
        H = phi.metric(y)
        if f is not None:
            grad = grad + fbar_scale * f.f_gradient(y)
            H = H + fbar_scale * f.f_hessian(y)
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("Newton system is singular") from exc
        step_dir = -np.linalg.solve(L.T, np.linalg.solve(L, grad))
        lam = math.sqrt(max(-grad @ step_dir, 0.0))
        if lam <= tol:
            # one last full step costs nothing and squares the error
            z = y + step_dir
            return z if np.isfinite(F(z)) else y
        t = 1.0
        slope = grad @ step_dir
        while True:
            z = y + t * step_dir
            Fz = F(z)
            if lam < 0.25 and np.isfinite(Fz):
                break  # quadratic-convergence region: keep the full step
            if np.isfinite(Fz) and Fz <= Fy + armijo * t * slope:
                break
            t *= shrink
            if t < 1e-20:
                raise ConvergenceError(f"line search stalled, Newton decrement {lam:.3e}", residual=lam)
        y, Fy = z, Fz
        if np.abs(y).max() > 1e12:
            raise ConvergenceError("iterates diverge; the objective is unbounded below", residual=lam)
    raise ConvergenceError(f"Newton did not converge, decrement {lam:.3e}", residual=lam)


# -- feasible point --------------------------------------------------------------


def find_interior(spec: ProblemSpec) -> Array:
    """A strictly feasible x maximizing a uniform constraint margin (conic phase-I)."""
    if spec.hint is not None:
        x = np.asarray(spec.hint, dtype=float)
        if not spec.contains(x) or not np.isfinite(spec.potential(x)):
            raise NeedFeasiblePoint("supplied hint is not strictly feasible")
        return x
    import cvxpy as cp

    d = spec.dim
    x = cp.Variable(d)
    tau = cp.Variable()
    cons = [tau <= 1.0, cp.abs(x) <= 1e6]
    for c in spec.constraints:
        if isinstance(c, Linear):
            norms = np.linalg.norm(c.A, axis=1)
            cons.append(c.A @ x - c.b >= tau * norms)
        elif isinstance(c, Ellipsoid):
            Q = 0.5 * (c.Q + c.Q.T)
            cons.append(0.5 * cp.quad_form(x, cp.psd_wrap(Q)) + c.p @ x + c.l <= -tau)
        elif isinstance(c, PSDCone):
            codec = SvecCodec(c.n)
            X = cp.Variable((c.n, c.n), symmetric=True)
            for k, (i, j) in enumerate(zip(codec.rows, codec.cols)):
                cons.append(X[i, j] == x[c.offset + k])
            cons.append(X - tau * np.eye(c.n) >> 0)
    for p in spec.potentials:
        if isinstance(p, (EntropyPotential, LogPotential)):
            cons.append(x[_sel(p.index, d)] >= tau)
    prob = cp.Problem(cp.Maximize(tau), cons)
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        prob.solve(solver=cp.SCS)
    if x.value is None or tau.value is None or not tau.value > 1e-9:
        raise NeedFeasiblePoint("could not find a strictly feasible point")
    xv = np.asarray(x.value, dtype=float)
    if not spec.contains(xv) or not np.isfinite(spec.potential(xv)):
        raise NeedFeasiblePoint("phase-I solution is not strictly feasible")
    return xv


# -- phase 1 ---------------------------------------------------------------------


def phase1_start(x_star: Array, composite, beta: float, d: int, rng: np.random.Generator,
                 nu: float | None = None, max_attempts: int = PHASE1_MAX_ATTEMPTS):
    """Draw from N(x*, sigma0^2/(1 + nu beta/d) g^{-1}) truncated to the Dikin ellipsoid of radius 3 sigma0 sqrt d.

    Returns (point, attempts).
    """
    nu = composite.nu if nu is None else nu
    s0 = sigma0_sq(d)
    scale = math.sqrt(s0 / (1.0 + nu * beta / d))
    radius = 3.0 * math.sqrt(s0) * math.sqrt(d)
    geom = composite.local(x_star)
    for attempt in range(1, max_attempts + 1):
        v = scale * geom.draw(rng)
        if math.sqrt(geom.quad(v)) <= radius:
            return x_star + v, attempt
    raise SamplingError(f"truncated Gaussian start rejected {max_attempts} times")


# -- driver ----------------------------------------------------------------------


@dataclass
class CoolingConfig:
    r0: float = 0.3
    c_inner: int = C_INNER
    inner_budget: int | None = None  # walk steps per schedule stage, default c_inner * d
    laziness: float = 0.5
    eps: float = 0.1
    thin: int = 1
    newton_tol: float = 1e-8


@dataclass
class SampleResult:
    x: Array  # samples projected to the original space, shape (n, x_dim)
    y: Array  # samples in the reduced space
    trace: list = field(default_factory=list)
    report: dict = field(default_factory=dict)
    state: WalkState | None = None


def _retarget(state: WalkState, potential) -> WalkState:
    V = potential(state.x)
    if not np.isfinite(V):
        raise NotInterior("chain left the domain between stages")
    state.potential = potential
    state.V = V
    return state


def _walk(state: WalkState, n_steps: int, r: float, laziness: float, record=None, thin: int = 1):
    cfg = WalkConfig(r=r, laziness=laziness, n_steps=max(1, n_steps), allow_large_r=True)
    acc0, prop0 = state.n_accepted, state.n_proposed
    k = 0
    for i in range(1, n_steps + 1):
        step(state, cfg)
        if record is not None and i % thin == 0:
            record[k] = state.x
            k += 1
    prop = state.n_proposed - prop0
    return (state.n_accepted - acc0) / prop if prop else float("nan")


def sample(red: ReducedProblem, n: int = 1, eps: float | None = None, config: CoolingConfig | None = None,
           rng: np.random.Generator | int | None = None, callback=None, hint: Array | None = None) -> SampleResult:
    """Run the four cooling phases and return n samples from the final walk."""
    cfg = config or CoolingConfig()
    eps = cfg.eps if eps is None else eps
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    comp = red.composite
    d = red.dim
    nu = comp.nu
    s = nu / d
    budget = cfg.inner_budget if cfg.inner_budget is not None else cfg.c_inner * d
    report: dict = {"dim": d, "x_dim": red.x_dim, "nu": nu, "nu_bar": comp.nu_bar, "inner_budget": budget,
                    "r0": cfg.r0, "laziness": cfg.laziness, "notes": []}

    if hint is None:
        hint = red.augment(find_interior(red.spec))
    x_star = analytic_center(comp, red, hint, fbar_scale=s, tol=cfg.newton_tol)
    comp.check_pd(x_star)
    center_value = comp.value(x_star) + s * red.f(x_star)

    try:
        phi_center = analytic_center(comp, None, x_star, tol=cfg.newton_tol, max_iter=200)
        phi_min = comp.value(phi_center)
        report["phi_normalization"] = "pure-barrier center"
    except ConvergenceError:
        phi_min = comp.value(x_star)
        report["phi_normalization"] = "barrier value at the cost-weighted center (pure-barrier center does not exist)"
    report["phi_min"] = phi_min

    def v_early(sigma2):
        return lambda y: (s * red.f(y) + comp.value(y) - center_value) / sigma2

    def v_late(sigma2):
        return lambda y: red.f(y) + (comp.value(y) - phi_min) / sigma2

    sched = initial_schedule(nu, d)
    if s < sched.sigma2:
        report["notes"].append("nu/d is below sigma_0^2; phase 2 skipped")
    y0, attempts = phase1_start(x_star, comp, red.beta_f, d, rng, nu=nu)
    report["phase1_attempts"] = attempts

    trace = []

    def potential_for(sc: CoolingSchedule):
        return v_early(sc.sigma2) if sc.sigma2 <= s else v_late(sc.sigma2)

    state = init_state(y0, potential_for(sched), comp, rng)
    while True:
        # the overshoot stage past nu still carries the barrier term
        stage = replace(sched, phase=3) if sched.phase == 4 else sched
        _, beta = relative_bounds(stage, red.alpha_f, red.beta_f)
        r = default_radius(beta, cfg.r0)
        acc = _walk(state, budget, r, cfg.laziness)
        rec = {"phase": sched.phase, "sigma2": sched.sigma2, "r": r, "steps": budget, "acceptance": acc}
        trace.append(rec)
        if callback is not None:
            callback(sched.phase, sched.sigma2, acc)
        if sched.done:
            break
        sched = advance_sigma(sched)
        _retarget(state, potential_for(sched))

    # phase 4: the target itself
    target = red.f
    _retarget(state, target)
    r = default_radius(red.beta_f, cfg.r0)
    burn = int(cfg.c_inner * d * max(1.0, math.ceil(math.log(1.0 / eps))))
    acc = _walk(state, burn, r, cfg.laziness)
    trace.append({"phase": 4, "sigma2": math.inf, "r": r, "steps": burn, "acceptance": acc})
    if callback is not None:
        callback(4, math.inf, acc)

    ys = np.empty((n, d))
    acc = _walk(state, n * cfg.thin, r, cfg.laziness, record=ys, thin=cfg.thin)
    trace.append({"phase": 4, "sigma2": math.inf, "r": r, "steps": n * cfg.thin, "acceptance": acc,
                  "collected": n})
    report["phase2_updates"] = sum(1 for t in trace if t["phase"] == 2)
    report["phase3_updates"] = sum(1 for t in trace if t["phase"] == 3)
    report["sample_acceptance"] = acc
    return SampleResult(x=ys[:, : red.x_dim].copy(), y=ys, trace=trace, report=report, state=state)
