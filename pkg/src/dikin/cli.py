"""Command line entry point: sample, walk, certify, compare, bench.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .cooling import CoolingConfig, find_interior, sample
from .errors import DikinError
from .io import PRESETS, ProblemFile, load_preset, load_problem
from .model import reduce
from .walk import WalkConfig, default_radius, run


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _dims(s: str):
    try:
        if ".." in s:
            lo, hi = s.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(t) for t in s.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad dimension list {s!r}") from exc
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("dimensions must be positive")
    return out


def _lazy(s):
    v = float(s)
    if v not in (0.0, 0.5):
        raise argparse.ArgumentTypeError("--lazy must be 0 or 0.5")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dikin", description="Dikin walk sampling and barrier diagnostics.")
    sub = ap.add_subparsers(dest="command", required=True)

    def problem_args(p):
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--problem", type=Path, help="problem file (JSON)")
        g.add_argument("--preset", choices=PRESETS, help="built-in problem")

    def walk_args(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--r", type=float, default=None, help="step radius (walk) or base radius r0 (sample)")
        p.add_argument("--lazy", type=_lazy, default=None)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--format", choices=("jsonl", "csv"), default=None)

    p = sub.add_parser("sample", help="full cooling schedule, samples to file")
    problem_args(p)
    walk_args(p)
    p.add_argument("--n", type=_positive_int, default=None, help="number of samples per chain")
    p.add_argument("--inner-budget", type=_positive_int, default=None, help="walk steps per schedule stage")
    p.add_argument("--thin", type=_positive_int, default=None)
    p.add_argument("--chains", type=_positive_int, default=1, help="independent chains (DIKIN_THREADS caps workers)")

    p = sub.add_parser("walk", help="raw Dikin walk on the target from a given start")
    problem_args(p)
    walk_args(p)
    p.add_argument("--n", type=_positive_int, default=1000, help="number of walk steps")
    p.add_argument("--start", type=str, default=None, help="comma-separated start point in the original coordinates")
    p.add_argument("--thin", type=_positive_int, default=1)

    p = sub.add_parser("certify", help="property certificates for a barrier family")
    p.add_argument("--barrier", choices=(*dg.BARRIER_NAMES, "all"), required=True)
    p.add_argument("--n", type=_positive_int, default=100, help="number of interior points")
    p.add_argument("--dirs", type=_positive_int, default=3, help="random directions per point")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--asc-draws", type=_positive_int, default=100)
    p.add_argument("--out", type=Path, default=None, help="write the certificate block as JSON")

    p = sub.add_parser("compare", help="compare samples with the rejection oracle")
    problem_args(p)
    p.add_argument("--samples", type=Path, default=None, help="samples file; sampled afresh when omitted")
    p.add_argument("--n", type=_positive_int, default=10000, help="oracle draws (and fresh samples)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=_positive_int, default=20)
    p.add_argument("--out", type=Path, default=None)

    p = sub.add_parser("bench", help="acceptance and ESS against dimension")
    p.add_argument("--family", choices=("polytope", "simplex", "psd"), default="polytope")
    p.add_argument("--dims", type=_dims, default=[2, 3, 4])
    p.add_argument("--n", type=_positive_int, default=2000, help="walk steps per dimension")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--lazy", type=_lazy, default=0.5)
    p.add_argument("--out", type=Path, default=Path("bench.csv"))
    return ap


def _problem(args) -> ProblemFile:
    return load_problem(args.problem) if args.problem is not None else load_preset(args.preset)


def write_samples(path: Path, x: np.ndarray, fmt: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if fmt == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i + 1}" for i in range(x.shape[1])])
            for row in x:
                w.writerow([repr(float(v)) for v in row])
        else:
            for row in x:
                fh.write(json.dumps([float(v) for v in row]) + "\n")


def read_samples(path: Path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        return np.zeros((0, 0))
    if text[0].lstrip().startswith("["):
        return np.array([json.loads(line) for line in text if line.strip()], dtype=float)
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=True)


def _walk_stats(x: np.ndarray) -> dict:
    if x.shape[0] < 4:
        return {}
    e = dg.ess(x)
    return {"ess": e.tolist(), "autocorrelation_time": (x.shape[0] / e).tolist()}


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _one_chain(job):
    pf, cfg, n, seed = job
    red = reduce(pf.spec, psd_fast_path=pf.sampler.psd_fast_path)
    res = sample(red, n, config=cfg, rng=np.random.default_rng(seed), hint=None if pf.spec.hint is None
                 else red.augment(pf.spec.hint))
    return res.x, res.trace, res.report


def cmd_sample(args) -> int:
    pf = _problem(args)
    s = pf.sampler
    n = args.n or s.n
    seed = s.seed if args.seed is None else args.seed
    cfg = CoolingConfig(r0=args.r or s.r0, c_inner=s.c_inner, inner_budget=args.inner_budget or s.inner_budget,
                        laziness=s.laziness if args.lazy is None else args.lazy, eps=s.eps, thin=args.thin or s.thin)
    fmt = args.format or pf.output.get("format", "jsonl")
    out = args.out or Path(pf.output.get("samples", "samples." + fmt))
    seeds = [int(c.generate_state(1)[0]) for c in np.random.SeedSequence(seed).spawn(args.chains)]
    jobs = [(pf, cfg, n, sd) for sd in seeds]
    workers = max(1, min(int(os.environ.get("DIKIN_THREADS", "1") or 1), args.chains))
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_one_chain, jobs))
    else:
        results = [_one_chain(j) for j in jobs]
    elapsed = time.perf_counter() - t0
    x = np.concatenate([r[0] for r in results])
    write_samples(out, x, fmt)
    red = reduce(pf.spec, psd_fast_path=s.psd_fast_path)
    meta = {
        "command": "sample",
        "problem": pf.name or (str(args.problem) if args.problem else args.preset),
        "seed": seed,
        "chain_seeds": seeds,
        "n_per_chain": n,
        "config": vars(cfg),
        "metric": red.describe(),
        "chains": [{"report": r[2], "schedule": r[1], "walk": _walk_stats(r[0])} for r in results],
        "mean": x.mean(axis=0).tolist(),
    }
    meta_path = _sidecar(out)
    meta_path.write_text(_dump(meta) + "\n", encoding="utf-8")
    acc = [r[2]["sample_acceptance"] for r in results]
    print(f"wrote {x.shape[0]} samples to {out} and metadata to {meta_path}")
    print(f"nu={red.composite.nu:.6g} nu_bar={red.composite.nu_bar:.6g} acceptance={np.mean(acc):.3f} "
          f"time={elapsed:.2f}s", file=sys.stderr)
    return 0


def cmd_walk(args) -> int:
    pf = _problem(args)
    red = reduce(pf.spec, psd_fast_path=pf.sampler.psd_fast_path)
    if args.start is not None:
        x0 = np.array([float(t) for t in args.start.split(",")])
        if x0.size != pf.spec.dim:
            raise DikinError(f"--start needs {pf.spec.dim} coordinates")
    else:
        x0 = pf.spec.hint if pf.spec.hint is not None else find_interior(pf.spec)
    y0 = red.augment(x0)
    seed = pf.sampler.seed if args.seed is None else args.seed
    r = args.r if args.r is not None else default_radius(red.beta_f)
    lazy = pf.sampler.laziness if args.lazy is None else args.lazy
    cfg = WalkConfig(r=r, laziness=lazy, n_steps=args.n, thin=args.thin, seed=seed)
    ys, state = run(y0, red.f, red.composite, cfg)
    x = ys[:, : red.x_dim]
    fmt = args.format or "jsonl"
    out = args.out or Path("walk." + fmt)
    write_samples(out, x, fmt)
    meta = {"command": "walk", "seed": seed, "r": r, "laziness": lazy, "steps": args.n, "thin": args.thin,
            "start": np.asarray(x0).tolist(), "acceptance": state.acceptance_rate, "metric": red.describe(),
            "walk": _walk_stats(x)}
    _sidecar(out).write_text(_dump(meta) + "\n", encoding="utf-8")
    print(f"wrote {x.shape[0]} states to {out}; acceptance {state.acceptance_rate:.3f}")
    return 0


def cmd_certify(args) -> int:
    names = dg.BARRIER_NAMES if args.barrier == "all" else (args.barrier,)
    rng = np.random.default_rng(args.seed)
    block = {}
    print(f"{'barrier':14s} {'property':16s} {'result':10s} {'worst':>11s} {'tol':>9s} {'samples':>8s}")
    for name in names:
        bar, center = dg.standard_instance(name, rng)
        t0 = time.perf_counter()
        pts = dg.interior_points(bar, center, args.n, rng)
        certs = dg.certify_barrier(bar, pts, n_dirs=args.dirs, rng=rng, asc_draws=args.asc_draws)
        block[name] = {"nu": bar.nu, "nu_bar": bar.nu_bar, "scaling": bar.scaling, "flags": bar.flags,
                       "certificates": [c.as_dict() for c in certs.values()],
                       "seconds": round(time.perf_counter() - t0, 3)}
        for c in certs.values():
            res = "unverified" if c.passed is None else ("pass" if c.passed else "FAIL")
            print(f"{name:14s} {c.name:16s} {res:10s} {c.worst:11.4g} {c.tol:9.3g} {c.samples:8d}  {c.note}")
    if args.out is not None:
        # timings are wall-clock and would break bitwise reproducibility of the file
        for v in block.values():
            v.pop("seconds")
        args.out.write_text(_dump(block) + "\n", encoding="utf-8")
    return 0


def cmd_compare(args) -> int:
    pf = _problem(args)
    rng = np.random.default_rng(args.seed)
    if args.samples is not None:
        x = read_samples(args.samples)
    else:
        red = reduce(pf.spec, psd_fast_path=pf.sampler.psd_fast_path)
        cfg = CoolingConfig(r0=pf.sampler.r0, c_inner=pf.sampler.c_inner, inner_budget=pf.sampler.inner_budget,
                            laziness=pf.sampler.laziness, eps=pf.sampler.eps, thin=pf.sampler.thin)
        x = sample(red, args.n, config=cfg, rng=rng).x
    if x.ndim != 2 or x.shape[1] != pf.spec.dim:
        raise DikinError(f"samples have shape {x.shape}, expected (n, {pf.spec.dim})")
    oracle = dg.rejection_oracle(pf.spec, args.n, rng)
    report = dg.compare_to_oracle(x, oracle, bins=args.bins)
    text = _dump(report)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _bench_instance(family: str, d: int, rng: np.random.Generator):
    from .linear import LogBarrier
    from .psd import SvecCodec, TruncatedPSDBarrier

    if family == "polytope":
        m = 4 * d
        A = rng.standard_normal((m, d))
        A /= np.linalg.norm(A, axis=1, keepdims=True)
        return LogBarrier(A, -np.ones(m)), np.zeros(d)
    if family == "simplex":
        A = np.vstack([np.eye(d), -np.ones((1, d))])
        b = np.concatenate([np.zeros(d), [-1.0]])
        return LogBarrier(A, b), np.full(d, 1.0 / (d + 1))
    # d is the matrix side for the PSD family
    codec = SvecCodec(d)
    return TruncatedPSDBarrier(d, [-np.eye(d)], [-1.0]), codec.svec(np.eye(d) / (d + 1))


def _svg_plot(rows, path: Path) -> None:
    w, h, pad = 480, 300, 40
    ds = [r["d"] for r in rows]
    acc = [r["acceptance"] for r in rows]
    x0, x1 = min(ds), max(ds) if max(ds) > min(ds) else min(ds) + 1

    def px(d):
        return pad + (w - 2 * pad) * (d - x0) / (x1 - x0)

    def py(a):
        return h - pad - (h - 2 * pad) * a

    pts = " ".join(f"{px(d):.1f},{py(a):.1f}" for d, a in zip(ds, acc))
    dots = "".join(f'<circle cx="{px(d):.1f}" cy="{py(a):.1f}" r="3"/>' for d, a in zip(ds, acc))
    ticks = "".join(f'<text x="{px(d):.1f}" y="{h - pad + 16}" font-size="11" text-anchor="middle">{d}</text>'
                    for d in ds)
    svg = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">'
           f'<rect width="{w}" height="{h}" fill="white"/>'
           f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>'
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="black"/>'
           f'<text x="{pad - 6}" y="{py(1) + 4:.1f}" font-size="11" text-anchor="end">1</text>'
           f'<text x="{pad - 6}" y="{py(0) + 4:.1f}" font-size="11" text-anchor="end">0</text>'
           f'<text x="{w / 2}" y="{h - 6}" font-size="12" text-anchor="middle">dimension</text>'
           f'<text x="{w / 2}" y="{pad - 14}" font-size="12" text-anchor="middle">acceptance rate</text>'
           f'{ticks}<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>{dots}</svg>\n')
    path.write_text(svg, encoding="utf-8")


def cmd_bench(args) -> int:
    rows = []
    for d in args.dims:
        rng = np.random.default_rng([args.seed, d])
        bar, x0 = _bench_instance(args.family, d, rng)
        r = args.r if args.r is not None else 0.3
        cfg = WalkConfig(r=r, laziness=args.lazy, n_steps=args.n)
        t0 = time.perf_counter()
        xs, st = run(x0, lambda y: 0.0, bar, cfg, rng=rng)
        secs = time.perf_counter() - t0
        burn = xs[xs.shape[0] // 5 :]
        e = float(dg.ess(burn).min()) if burn.shape[0] >= 4 else math.nan
        rows.append({"family": args.family, "d": d, "dim": bar.dim, "steps": args.n, "r": r,
                     "acceptance": st.acceptance_rate, "ess_min": e, "seconds": secs})
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    svg = args.out.with_suffix(".svg")
    _svg_plot(rows, svg)
    for row in rows:
        print(f"d={row['d']:3d} dim={row['dim']:3d} acceptance={row['acceptance']:.3f} ess_min={row['ess_min']:.1f}")
    print(f"wrote {args.out} and {svg}")
    return 0


COMMANDS = {"sample": cmd_sample, "walk": cmd_walk, "certify": cmd_certify, "compare": cmd_compare,
            "bench": cmd_bench}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (DikinError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    return run_cli(argv)


if __name__ == "__main__":
    sys.exit(main())
