"""Oracles, property certificates and sample comparisons for desk-scale problems."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, stats

from .errors import OracleInfeasible, StatisticsError
from .linear import LewisBarrier, LogBarrier, VaidyaBarrier
from .metric import HOLDS, Array, Barrier, SymPD
from .model import (
    Ellipsoid,
    EntropyPotential,
    ExpPotential,
    Linear,
    LinearPotential,
    LogDetPotential,
    LogPotential,
    NormPotential,
    PowerPotential,
    ProblemSpec,
    PSDCone,
    QuadraticPotential,
    _sel,
)
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

# -- Monte Carlo error ----------------------------------------------------------


def _autocorr(x: Array) -> Array:
    n = x.size
    x = x - x.mean()
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    return acf / acf[0] if acf[0] > 0 else np.zeros(n)


def ess(x: Array) -> Array:
    """Effective sample size per column (initial monotone positive sequence)."""
    x = np.asarray(x, dtype=float)
    cols = x.reshape(x.shape[0], -1)
    out = np.empty(cols.shape[1])
    n = cols.shape[0]
    for j in range(cols.shape[1]):
        rho = _autocorr(cols[:, j])
        if not rho.any():
            out[j] = n
            continue
        pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
        stop = np.flatnonzero(pairs <= 0)
        pairs = pairs[: stop[0]] if stop.size else pairs
        pairs = np.minimum.accumulate(pairs)
        tau = max(-1.0 + 2.0 * pairs.sum(), 1.0 / n)
        out[j] = min(n / tau, n * math.log10(max(n, 10)))
    return out if x.ndim > 1 else out[:1]


def autocorrelation_time(x: Array) -> Array:
    x = np.asarray(x, dtype=float)
    return x.shape[0] / ess(x)


def mcse_mean(x: Array) -> Array:
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    return x.std(axis=0, ddof=1) / np.sqrt(ess(x))


def moment_zscores(x: Array, mean: Array, var: Array | None = None) -> dict:
    """z-scores of sample mean and variance against exact values, using ESS-based errors."""
    x = np.asarray(x, dtype=float).reshape(len(x), -1)
    if x.shape[0] < 50:
        raise StatisticsError("need at least 50 samples")
    m = x.mean(axis=0)
    z_mean = (m - np.asarray(mean)) / mcse_mean(x)
    out = {"mean": m, "z_mean": z_mean, "ess": ess(x)}
    if var is not None:
        sq = (x - m) ** 2
        v = x.var(axis=0, ddof=1)
        out["var"] = v
        out["z_var"] = (v - np.asarray(var)) / mcse_mean(sq)
    return out


# -- rejection oracle -----------------------------------------------------------


def _cvx_potential(p, x, cp):
    if isinstance(p, LinearPotential):
        return np.asarray(p.c, dtype=float) @ x
    if isinstance(p, QuadraticPotential):
        S = np.asarray(p.Sigma, dtype=float)
        return 0.5 * cp.quad_form(x - np.asarray(p.mu), cp.psd_wrap(0.5 * (S + S.T)))
    if isinstance(p, NormPotential):
        L = np.linalg.cholesky(np.asarray(p.Sigma, dtype=float))
        return cp.norm(L.T @ (x - np.asarray(p.mu)))
    d = x.shape[0]
    if isinstance(p, EntropyPotential):
        return -cp.sum(cp.entr(x[_sel(p.index, d)]))
    if isinstance(p, PowerPotential):
        return cp.sum(cp.power(cp.abs(x[_sel(p.index, d)]), p.p))
    if isinstance(p, LogPotential):
        return -cp.sum(cp.log(x[_sel(p.index, d)]))
    if isinstance(p, ExpPotential):
        return cp.sum(cp.exp(x[_sel(p.index, d)]))
    if isinstance(p, LogDetPotential):
        codec = SvecCodec(p.n)
        X = cp.bmat([[x[p.offset + _svec_pos(codec, i, j)] for j in range(p.n)] for i in range(p.n)])
        return -cp.log_det(X)
    raise OracleInfeasible(f"unsupported potential {type(p).__name__}")


def _svec_pos(codec: SvecCodec, i: int, j: int) -> int:
    i, j = max(i, j), min(i, j)
    return int(np.flatnonzero((codec.rows == i) & (codec.cols == j))[0])


def _cvx_constraints(spec: ProblemSpec, x, cp):
    cons = []
    for c in spec.constraints:
        if isinstance(c, Linear):
            cons.append(c.A @ x >= c.b)
        elif isinstance(c, Ellipsoid):
            Q = 0.5 * (c.Q + c.Q.T)
            cons.append(0.5 * cp.quad_form(x, cp.psd_wrap(Q)) + c.p @ x + c.l <= 0)
        elif isinstance(c, PSDCone):
            codec = SvecCodec(c.n)
            X = cp.bmat([[x[c.offset + _svec_pos(codec, i, j)] for j in range(c.n)] for i in range(c.n)])
            cons.append(0.5 * (X + X.T) >> 0)
    return cons


def bounding_box(spec: ProblemSpec) -> Array:
    """Axis-aligned box containing the body: supplied, or computed coordinate-wise by convex programs."""
    if spec.bounding_box is not None:
        return np.asarray(spec.bounding_box, dtype=float).reshape(spec.dim, 2)
    import cvxpy as cp

    x = cp.Variable(spec.dim)
    cons = _cvx_constraints(spec, x, cp)
    box = np.zeros((spec.dim, 2))
    for i in range(spec.dim):
        for k, sense in enumerate((cp.Minimize, cp.Maximize)):
            prob = cp.Problem(sense(x[i]), cons)
            prob.solve(solver=cp.CLARABEL)
            if prob.status not in ("optimal", "optimal_inaccurate") or not np.isfinite(prob.value):
                raise OracleInfeasible("body is unbounded or infeasible; supply a bounding box")
            box[i, k] = prob.value
    pad = 1e-9 * max(1.0, np.abs(box).max())
    box[:, 0] -= pad
    box[:, 1] += pad
    return box


def _potential_lower_bound(spec: ProblemSpec, box: Array) -> float:
    if not spec.potentials:
        return 0.0
    import cvxpy as cp

    x = cp.Variable(spec.dim)
    cons = _cvx_constraints(spec, x, cp) + [x >= box[:, 0], x <= box[:, 1]]
    obj = sum(_cvx_potential(p, x, cp) for p in spec.potentials)
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver=cp.CLARABEL)
    if prob.value is None or not np.isfinite(prob.value):
        raise OracleInfeasible("could not bound the potential on the body")
    return float(prob.value) - 1e-7 * max(1.0, abs(prob.value))


def rejection_oracle(spec: ProblemSpec, n: int, rng: np.random.Generator | int | None = None,
                     box: Array | None = None, batch: int = 65536, min_rate: float = 1e-6) -> Array:
    """Exact i.i.d. samples from exp(-sum f_i) on K by bounding-box rejection (dimension <= 3)."""
    if spec.dim > 3:
        raise OracleInfeasible("rejection oracle is limited to dimension 3")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    box = bounding_box(spec) if box is None else np.asarray(box, dtype=float).reshape(spec.dim, 2)
    f_lo = _potential_lower_bound(spec, box)
    while True:
        out, tried, restart = [], 0, False
        while sum(len(o) for o in out) < n:
            u = box[:, 0] + (box[:, 1] - box[:, 0]) * rng.random((batch, spec.dim))
            tried += batch
            keep = np.array([spec.contains(z) for z in u])
            z = u[keep]
            if z.size:
                f = np.array([spec.potential(p) for p in z])
                if np.any(f < f_lo):
                    # the solver bound was not valid; lower it and restart for exactness
                    f_lo = float(f.min()) - 1e-6
                    restart = True
                    break
                acc = rng.random(len(z)) < np.exp(-(f - f_lo))
                out.append(z[acc])
            got = sum(len(o) for o in out)
            if tried >= 1_000_000 and got / tried < min_rate:
                raise OracleInfeasible(f"acceptance rate {got / tried:.2e} is below {min_rate:g}")
        if not restart:
            return np.concatenate(out)[:n]


def quadrature_density_1d(logpdf, lo: float, hi: float):
    """Normalized density and CDF on [lo, hi] from an unnormalized log density."""
    grid = np.linspace(lo, hi, 2001)
    shift = max(logpdf(t) for t in grid)
    Z, _ = integrate.quad(lambda t: math.exp(logpdf(t) - shift), lo, hi, limit=200, epsabs=0, epsrel=1e-12)

    def pdf(t):
        return math.exp(logpdf(t) - shift) / Z

    def cdf(t):
        return integrate.quad(pdf, lo, t, limit=200, epsabs=1e-13, epsrel=1e-12)[0]

    return pdf, cdf


# -- comparison -----------------------------------------------------------------


def histogram_tv(a: Array, b: Array, bins=20, range_=None) -> float:
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    b = np.asarray(b, dtype=float).reshape(len(b), -1)
    if a.shape[1] > 2:
        raise StatisticsError("histogram TV is limited to 1-2 dimensions")
    if range_ is None:
        lo = np.minimum(a.min(0), b.min(0))
        hi = np.maximum(a.max(0), b.max(0))
        range_ = list(zip(lo, hi))
    ha, _ = np.histogramdd(a, bins=bins, range=range_)
    hb, _ = np.histogramdd(b, bins=bins, range=range_)
    return 0.5 * float(np.abs(ha / ha.sum() - hb / hb.sum()).sum())


def density_tv_1d(samples: Array, cdf, lo: float, hi: float, bins: int = 20) -> float:
    """TV between the sample histogram and exact bin probabilities."""
    edges = np.linspace(lo, hi, bins + 1)
    counts, _ = np.histogram(np.asarray(samples).ravel(), bins=edges)
    cdfs = np.array([cdf(e) for e in edges])
    probs = np.diff(cdfs)
    return 0.5 * float(np.abs(counts / counts.sum() - probs / probs.sum()).sum())


def compare_to_oracle(samples: Array, oracle: Array | None = None, cdf=None, bounds=None, bins: int = 20) -> dict:
    """Moment deltas in standard-error units, histogram TV and per-coordinate KS tests.

    Either ``oracle`` samples or, in 1D, an exact ``cdf`` with ``bounds``.
    """
    x = np.asarray(samples, dtype=float).reshape(len(samples), -1)
    if x.shape[0] < 50:
        raise StatisticsError("need at least 50 samples")
    report = {"n": int(x.shape[0]), "ess": ess(x).tolist()}
    if oracle is not None:
        y = np.asarray(oracle, dtype=float).reshape(len(oracle), -1)
        if y.shape[1] != x.shape[1]:
            raise StatisticsError("dimension mismatch between samples and oracle")
        if y.shape[0] < 50:
            raise StatisticsError("need at least 50 oracle samples")
        se_x = mcse_mean(x)
        se_y = mcse_mean(y)
        dm = x.mean(0) - y.mean(0)
        se = np.sqrt(se_x**2 + se_y**2)
        report["mean_delta_se"] = np.where(se > 0, dm / np.where(se > 0, se, 1), 0.0).tolist()
        vx, vy = x.var(0, ddof=1), y.var(0, ddof=1)
        se_v = np.sqrt(mcse_mean((x - x.mean(0)) ** 2) ** 2 + mcse_mean((y - y.mean(0)) ** 2) ** 2)
        report["var_delta_se"] = np.where(se_v > 0, (vx - vy) / np.where(se_v > 0, se_v, 1), 0.0).tolist()
        if x.shape[1] <= 2:
            report["tv"] = histogram_tv(x, y, bins=bins)
        report["ks_pvalue"] = [float(stats.ks_2samp(x[:, j], y[:, j]).pvalue) for j in range(x.shape[1])]
        report["flagged"] = bool(np.any(np.abs(report["mean_delta_se"]) > 3) or np.any(np.abs(report["var_delta_se"]) > 3))
    elif cdf is not None:
        lo, hi = bounds
        report["tv"] = density_tv_1d(x[:, 0], cdf, lo, hi, bins=bins)
        report["ks_pvalue"] = [float(stats.kstest(x[:, 0], np.vectorize(cdf)).pvalue)]
    else:
        raise StatisticsError("need oracle samples or a cdf")
    return report


# -- property certificates ----------------------------------------------------


def boundary_distance(barrier: Barrier, x: Array, u: Array, t_cap: float = 1e3, iters: int = 60) -> float:
    """Largest t with x + t u strictly inside (capped at t_cap), by bisection."""
    lo, hi = 0.0, 1e-3
    while barrier.in_domain(x + hi * u):
        lo = hi
        hi *= 2.0
        if hi > t_cap:
            if barrier.in_domain(x + t_cap * u):
                return t_cap
            hi = t_cap
            break
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if barrier.in_domain(x + mid * u):
            lo = mid
        else:
            hi = mid
    return lo


def interior_points(barrier: Barrier, center: Array, n: int, rng: np.random.Generator, shrink: float = 0.98) -> Array:
    """Points spread through the domain along random rays from a known interior center."""
    pts = np.empty((n, barrier.dim))
    for i in range(n):
        u = rng.standard_normal(barrier.dim)
        u /= np.linalg.norm(u)
        tmax = boundary_distance(barrier, center, u, t_cap=50.0)
        pts[i] = center + shrink * rng.random() * tmax * u
    return pts


def _inv_sqrt(g: Array) -> Array:
    w, V = np.linalg.eigh(g)
    return (V / np.sqrt(w)) @ V.T


@dataclass
class Certificate:
    name: str
    passed: bool | None
    worst: float
    tol: float
    samples: int
    note: str = ""

    def as_dict(self):
        return {"property": self.name, "passed": self.passed, "worst": self.worst, "tol": self.tol,
                "samples": self.samples, "note": self.note}


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), np.linalg.norm(a), 1e-300))


def derivative_errors(barrier: Barrier, x: Array, h: Array, eps: float = 1e-5) -> dict:
    """Relative gaps between closed-form derivatives and central differences.

    ``h`` is rescaled to unit local norm so that the step stays well inside
    the Dikin ellipsoid.
    """
    g = barrier.metric(x)
    h = h / math.sqrt(h @ g @ h)
    out = {}
    fd = (barrier.value(x + eps * h) - barrier.value(x - eps * h)) / (2 * eps)
    out["gradient"] = abs(fd - barrier.gradient(x) @ h) / max(abs(fd), np.linalg.norm(barrier.gradient(x)) * np.linalg.norm(h), 1e-300)
    if barrier.hessian_metric:
        fd = (barrier.gradient(x + eps * h) - barrier.gradient(x - eps * h)) / (2 * eps)
        out["hessian"] = _rel(g @ h, fd)
    fd = (barrier.metric(x + eps * h) - barrier.metric(x - eps * h)) / (2 * eps)
    out["dmetric"] = _rel(barrier.dmetric(x, h), fd)
    if barrier.has_d2metric:
        fd = (barrier.dmetric(x + eps * h, h) - barrier.dmetric(x - eps * h, h)) / (2 * eps)
        out["d2metric"] = _rel(barrier.d2metric(x, h), fd)
    return out


def certify_barrier(barrier: Barrier, points: Array, n_dirs: int = 5, rng: np.random.Generator | int | None = None,
                    fd_tol: float = 1e-4, asc_eps: float = 0.1, asc_draws: int = 200,
                    chord: bool = True, properties=None) -> dict:
    """Run the certificate suite at each point; returns {property: Certificate}."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    points = np.atleast_2d(points)
    want = set(properties) if properties is not None else None

    def on(name):
        return want is None or name in want

    worst = {k: -math.inf for k in ("derivatives", "SC", "SSC", "LTSC", "D2g_psd", "nu", "symmetry_outer", "symmetry_inner")}
    counts = dict.fromkeys(worst, 0)
    notes = {}
    claims_convex = _claims(barrier, "D2g_psd")
    if not claims_convex:
        notes["D2g_psd"] = "not claimed"
    if not barrier.hessian_metric:
        notes["nu"] = "no barrier gradient for a non-Hessian metric"
    for x in points:
        g = barrier.metric(x)
        Gm = _inv_sqrt(g)
        gi = np.linalg.inv(g)
        if on("nu") and barrier.hessian_metric:
            gr = barrier.gradient(x)
            worst["nu"] = max(worst["nu"], float(gr @ gi @ gr) / barrier.nu)
            counts["nu"] += 1
        for _ in range(n_dirs):
            h = rng.standard_normal(barrier.dim)
            hn = math.sqrt(h @ g @ h)
            h = h / hn
            if on("derivatives"):
                errs = derivative_errors(barrier, x, h)
                worst["derivatives"] = max(worst["derivatives"], max(errs.values()) / fd_tol)
                counts["derivatives"] += 1
            Dg = barrier.dmetric(x, h)
            S = Gm @ Dg @ Gm
            if on("SC"):
                worst["SC"] = max(worst["SC"], float(np.abs(np.linalg.eigvalsh(S)).max()) / 2.0)
                counts["SC"] += 1
            if on("SSC"):
                worst["SSC"] = max(worst["SSC"], float(np.linalg.norm(S, "fro")) / 2.0)
                counts["SSC"] += 1
            if barrier.has_d2metric and (on("LTSC") or on("D2g_psd")):
                D2 = barrier.d2metric(x, h)
                worst["LTSC"] = max(worst["LTSC"], -float(np.trace(gi @ D2)))
                counts["LTSC"] += 1
                if claims_convex:
                    worst["D2g_psd"] = max(worst["D2g_psd"], -float(np.linalg.eigvalsh(Gm @ D2 @ Gm).min()))
                    counts["D2g_psd"] += 1
            if chord and on("symmetry"):
                # outer: points of K cap (2x - K) lie in the sqrt(nu_bar) Dikin ellipsoid
                u = rng.standard_normal(barrier.dim)
                u /= np.linalg.norm(u)
                t = min(boundary_distance(barrier, x, u), boundary_distance(barrier, x, -u))
                if t < 1e3:
                    v = t * u
                    worst["symmetry_outer"] = max(worst["symmetry_outer"], float(v @ g @ v) / barrier.nu_bar)
                    counts["symmetry_outer"] += 1
                # inner: the unit Dikin ellipsoid lies in K cap (2x - K)
                v = 0.999999 * h
                inside = barrier.in_domain(x + v) and barrier.in_domain(x - v)
                worst["symmetry_inner"] = max(worst["symmetry_inner"], 0.0 if inside else 2.0)
                counts["symmetry_inner"] += 1
    tol = {"derivatives": 1.0, "SC": 1.0 + 1e-9, "SSC": 1.0 + 1e-9, "LTSC": 1.0 + 1e-9, "D2g_psd": 1e-8,
           "nu": 1.0 + 1e-9, "symmetry_outer": 1.0 + 1e-9, "symmetry_inner": 1.0}
    out = {}
    for k, w in worst.items():
        if counts[k] == 0:
            out[k] = Certificate(k, None, float("nan"), tol[k], 0, notes.get(k, "unverified"))
        else:
            out[k] = Certificate(k, bool(w <= tol[k]), w, tol[k], counts[k], notes.get(k, ""))
    if on("ASC"):
        out.update(asc_check(barrier, points[: min(len(points), 20)], rng, eps=asc_eps, draws=asc_draws))
    return out


def _claims(barrier: Barrier, prop: str) -> bool:
    base = getattr(barrier, "base", barrier)
    if hasattr(base, "parts"):
        return all(_claims(p, prop) for p in base.parts)
    return base.flags.get(prop) == HOLDS


def asc_check(barrier: Barrier, points: Array, rng: np.random.Generator, eps: float = 0.1, draws: int = 200,
              radii=(0.1, 0.05, 0.01)) -> dict:
    """Empirical failure probability of the average self-concordance event at fixed radii."""
    d = barrier.dim
    out = {}
    for r in radii:
        fails = total = 0
        for x in points:
            gx = SymPD(barrier.metric(x), check=False)
            for _ in range(draws):
                v = (r / math.sqrt(d)) * gx.draw(rng)
                z = x + v
                total += 1
                if not barrier.in_domain(z):
                    fails += 1
                    continue
                gap = v @ barrier.metric(z) @ v - gx.quad(v)
                fails += gap > 2 * eps * r * r / d
        p = fails / total
        out[f"ASC_r={r:g}"] = Certificate(f"ASC_r={r:g}", bool(p <= eps), p, eps, total, "empirical failure probability")
    ok = [r for r in radii if out[f"ASC_r={r:g}"].passed]
    smallest = out[f"ASC_r={min(radii):g}"]
    out["ASC"] = Certificate("ASC", smallest.passed, smallest.worst, eps, smallest.samples,
                             f"largest passing radius {max(ok):g}" if ok else "no radius in the grid passes")
    return out


# -- standard certificate instances ----------------------------------------------


def _random_polytope(rng, m=10, d=3):
    A = rng.standard_normal((m, d))
    A = np.vstack([A, np.eye(d), -np.eye(d)])
    b = np.concatenate([-rng.uniform(0.5, 2.0, m), -np.ones(d) * 2, -np.ones(d) * 2])
    return A, b, np.zeros(d)


def _pd(rng, d):
    G = rng.standard_normal((d, d))
    return G @ G.T / d + 0.5 * np.eye(d)


def standard_instance(name: str, rng: np.random.Generator | int | None = 0, n: int = 3):
    """(barrier, interior center) for the named barrier family."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if name in ("log", "vaidya", "lewis", "vaidya44"):
        A, b, c = _random_polytope(rng)
        bar = {"log": lambda: LogBarrier(A, b), "vaidya": lambda: VaidyaBarrier(A, b),
               "vaidya44": lambda: VaidyaBarrier(A, b, c=44.0), "lewis": lambda: LewisBarrier(A, b)}[name]()
        return bar, c
    if name == "ellipsoid":
        Q = _pd(rng, 3)
        c = rng.standard_normal(3) * 0.3
        p = -Q @ c
        l = -1.0 + 0.5 * c @ Q @ c
        return ellipsoid_barrier(Q, p, l), c
    if name in ("gaussian", "soc"):
        S = _pd(rng, 2)
        mu = rng.standard_normal(2) * 0.3
        f = gaussian_epigraph_barrier if name == "gaussian" else soc_barrier
        return f(S, mu), np.concatenate([mu, [1.0]])
    if name in ("psd", "psd-unscaled"):
        bar = PSDBarrier(n, scaling=None if name == "psd" else 1.0)
        return bar, bar.codec.svec(np.eye(n))
    if name == "truncated-psd":
        codec = SvecCodec(n)
        bar = TruncatedPSDBarrier(n, [-np.eye(n)], [-1.0])
        return bar, codec.svec(np.eye(n) / (2 * n))
    if name == "entropy":
        return entropy_barrier(2), np.array([1.0, 1.0, 1.0, 1.0])
    if name == "log-epigraph":
        return log_epigraph_barrier(2), np.array([1.0, 1.0, 1.0, 1.0])
    if name == "exp-epigraph":
        return exp_epigraph_barrier(2), np.array([0.0, 0.0, 3.0, 3.0])
    if name == "power":
        return power_barrier(2, 3.0), np.array([0.0, 0.0, 1.0, 1.0])
    raise KeyError(f"unknown barrier {name!r}")


BARRIER_NAMES = ("log", "vaidya", "lewis", "ellipsoid", "gaussian", "soc", "psd", "psd-unscaled", "truncated-psd",
                 "entropy", "power", "log-epigraph", "exp-epigraph")


# -- 1D warm-start ratios by quadrature --------------------------------------------


def l2_ratio_1d(logp, logq, lo: float, hi: float, points=None) -> float:
    """||p/q|| = int p^2/q for normalized densities given by unnormalized log densities."""

    def mode(logf):
        # concentrated stage targets can be far narrower than any fixed grid
        res = optimize.minimize_scalar(lambda t: -logf(t), bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, hi - lo)})
        grid = np.linspace(lo, hi, 2001)[1:-1]
        best = max(grid, key=logf)
        return res.x if logf(res.x) >= logf(best) else best

    mp, mq = mode(logp), mode(logq)
    sp, sq = logp(mp), logq(mq)
    pts = sorted({mp, mq} | set(points or ()))

    def integ(fun):
        return integrate.quad(fun, lo, hi, points=pts, limit=500, epsabs=0, epsrel=1e-10)[0]

    Zp = integ(lambda t: math.exp(logp(t) - sp))
    Zq = integ(lambda t: math.exp(logq(t) - sq))
    # int (p/Zp)^2 / (q/Zq)
    num = integ(lambda t: math.exp(min(700.0, 2 * (logp(t) - sp) - (logq(t) - sq))))
    return num * Zq / Zp**2


def ball_walk(x0: Array, log_density, delta: float, n_steps: int, rng: np.random.Generator) -> Array:
    """Metropolis ball walk baseline: uniform proposal in a Euclidean ball of radius delta."""
    x = np.array(x0, dtype=float)
    lp = log_density(x)
    d = x.size
    out = np.empty((n_steps, d))
    for i in range(n_steps):
        u = rng.standard_normal(d)
        u *= delta * rng.random() ** (1.0 / d) / np.linalg.norm(u)
        z = x + u
        lz = log_density(z)
        if np.isfinite(lz) and math.log(rng.random()) < lz - lp:
            x, lp = z, lz
        out[i] = x
    return out
