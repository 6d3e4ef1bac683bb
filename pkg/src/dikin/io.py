"""Problem files: JSON schema, loading, serialization and ready-made presets.

A problem file is UTF-8 JSON.  Matrices are row-major nested arrays.  A PSD
block of side n occupies n(n+1)/2 consecutive coordinates starting at
``offset`` and stores the lower triangle column by column:
X[0,0], X[1,0], ..., X[n-1,0], X[1,1], X[2,1], ..., X[n-1,n-1].
Off-diagonal entries appear once and are not weighted.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DikinError, ParseError
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
)

FORMAT_VERSION = "1"

_num = {"type": "number"}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_index = {"anyOf": [{"type": "null"}, {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}]}


def _term(kind: str, props: dict, required=()) -> dict:
    return {
        "type": "object",
        "properties": {"type": {"const": kind}, **props},
        "required": ["type", *required],
        "additionalProperties": False,
    }


def _by_type(terms: dict) -> dict:
    # dispatch on "type" so that validation errors point at the right branch
    branches = [
        {"if": {"properties": {"type": {"const": k}}, "required": ["type"]}, "then": v}
        for k, v in terms.items()
    ]
    return {
        "type": "object",
        "required": ["type"],
        "properties": {"type": {"enum": list(terms)}},
        "allOf": branches,
    }


CONSTRAINT_SCHEMAS = {
    "linear": _term("linear", {"A": _mat, "b": _vec, "metric": {"enum": ["log", "vaidya", "lewis"]}}, ("A", "b")),
    "ellipsoid": _term("ellipsoid", {"Q": _mat, "p": _vec, "l": _num}, ("Q", "p", "l")),
    "psd": _term("psd", {"n": {"type": "integer", "minimum": 1}, "offset": {"type": "integer", "minimum": 0}}, ("n",)),
}

POTENTIAL_SCHEMAS = {
    "linear": _term("linear", {"c": _vec}, ("c",)),
    "quadratic": _term("quadratic", {"Sigma": _mat, "mu": _vec}, ("Sigma", "mu")),
    "norm": _term("norm", {"Sigma": _mat, "mu": _vec}, ("Sigma", "mu")),
    "entropy": _term("entropy", {"index": _index}),
    "power": _term("power", {"p": {"type": "number", "minimum": 1}, "index": _index}, ("p",)),
    "log": _term("log", {"index": _index}),
    "exp": _term("exp", {"index": _index}),
    "logdet": _term("logdet", {"n": {"type": "integer", "minimum": 1}, "offset": {"type": "integer", "minimum": 0}},
                    ("n",)),
}

SAMPLER_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "r0": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "c_inner": {"type": "integer", "minimum": 1},
        "inner_budget": {"type": "integer", "minimum": 1},
        "laziness": {"enum": [0, 0.5]},
        "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "thin": {"type": "integer", "minimum": 1},
        "psd_fast_path": {"type": "boolean"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["version", "dimension", "constraints"],
    "properties": {
        "version": {"const": FORMAT_VERSION},
        "name": {"type": "string"},
        "dimension": {"type": "integer", "minimum": 1},
        "constraints": {"type": "array", "items": _by_type(CONSTRAINT_SCHEMAS)},
        "potentials": {"type": "array", "items": _by_type(POTENTIAL_SCHEMAS)},
        "bounding_box": {"type": "array", "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}},
        "hint": _vec,
        "sampler": SAMPLER_SCHEMA,
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "string"},
                "metadata": {"type": "string"},
                "format": {"enum": ["jsonl", "csv"]},
            },
        },
    },
}


@dataclass
class SamplerConfig:
    n: int = 1000
    seed: int = 0
    r0: float = 0.3
    c_inner: int = 50
    inner_budget: int | None = None
    laziness: float = 0.5
    eps: float = 0.1
    thin: int = 1
    psd_fast_path: bool = True


@dataclass
class ProblemFile:
    spec: ProblemSpec
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    output: dict = field(default_factory=dict)
    name: str | None = None
    raw: dict = field(default_factory=dict)


def _path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def validate(doc) -> None:
    """Raise ParseError at the deepest failing location."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = list(validator.iter_errors(doc))
    if not errors:
        return
    err = max(errors, key=lambda e: len(e.absolute_path))
    while err.context:
        err = max(err.context, key=lambda e: len(e.absolute_path))
    raise ParseError(err.message, _path(err.absolute_path))


def _index_tuple(v):
    return None if v is None else tuple(int(i) for i in v)


def _constraint(t: dict):
    kind = t["type"]
    if kind == "linear":
        return Linear(np.array(t["A"], dtype=float), np.array(t["b"], dtype=float), t.get("metric", "log"))
    if kind == "ellipsoid":
        return Ellipsoid(np.array(t["Q"], dtype=float), np.array(t["p"], dtype=float), float(t["l"]))
    return PSDCone(int(t["n"]), int(t.get("offset", 0)))


def _potential(t: dict):
    kind = t["type"]
    if kind == "linear":
        return LinearPotential(np.array(t["c"], dtype=float))
    if kind in ("quadratic", "norm"):
        cls = QuadraticPotential if kind == "quadratic" else NormPotential
        return cls(np.array(t["Sigma"], dtype=float), np.array(t["mu"], dtype=float))
    if kind == "entropy":
        return EntropyPotential(_index_tuple(t.get("index")))
    if kind == "power":
        return PowerPotential(float(t["p"]), _index_tuple(t.get("index")))
    if kind == "log":
        return LogPotential(_index_tuple(t.get("index")))
    if kind == "exp":
        return ExpPotential(_index_tuple(t.get("index")))
    return LogDetPotential(int(t["n"]), int(t.get("offset", 0)))


def _check_dims(doc: dict) -> None:
    d = doc["dimension"]
    for i, t in enumerate(doc["constraints"]):
        loc = f"$.constraints[{i}]"
        if t["type"] == "linear":
            A = t["A"]
            if any(len(row) != d for row in A):
                raise ParseError(f"rows of A must have length {d}", loc + ".A")
            if len(t["b"]) != len(A):
                raise ParseError("b must have one entry per row of A", loc + ".b")
        elif t["type"] == "ellipsoid":
            if len(t["Q"]) != d or any(len(row) != d for row in t["Q"]):
                raise ParseError(f"Q must be {d}x{d}", loc + ".Q")
            if len(t["p"]) != d:
                raise ParseError(f"p must have length {d}", loc + ".p")
        elif t.get("offset", 0) + t["n"] * (t["n"] + 1) // 2 > d:
            raise ParseError("PSD block exceeds the dimension", loc)
    for i, t in enumerate(doc.get("potentials", [])):
        loc = f"$.potentials[{i}]"
        if t["type"] == "linear" and len(t["c"]) != d:
            raise ParseError(f"c must have length {d}", loc + ".c")
        if t["type"] in ("quadratic", "norm"):
            if len(t["Sigma"]) != d or any(len(row) != d for row in t["Sigma"]):
                raise ParseError(f"Sigma must be {d}x{d}", loc + ".Sigma")
            if len(t["mu"]) != d:
                raise ParseError(f"mu must have length {d}", loc + ".mu")
        if t.get("index") is not None and max(t["index"]) >= d:
            raise ParseError("index out of range", loc + ".index")
        if t["type"] == "logdet" and t.get("offset", 0) + t["n"] * (t["n"] + 1) // 2 > d:
            raise ParseError("logdet block exceeds the dimension", loc)
    if "bounding_box" in doc and len(doc["bounding_box"]) != d:
        raise ParseError(f"bounding_box needs {d} rows", "$.bounding_box")
    if "hint" in doc and len(doc["hint"]) != d:
        raise ParseError(f"hint must have length {d}", "$.hint")


def parse_problem(doc) -> ProblemFile:
    """Validate a decoded JSON document and build the problem."""
    validate(doc)
    _check_dims(doc)
    cons, pots = [], []
    for i, t in enumerate(doc["constraints"]):
        try:
            cons.append(_constraint(t))
        except DikinError as exc:
            raise ParseError(str(exc), f"$.constraints[{i}]") from exc
    for i, t in enumerate(doc.get("potentials", [])):
        try:
            pots.append(_potential(t))
        except DikinError as exc:
            raise ParseError(str(exc), f"$.potentials[{i}]") from exc
    try:
        spec = ProblemSpec(
            dim=doc["dimension"],
            constraints=cons,
            potentials=pots,
            bounding_box=None if "bounding_box" not in doc else np.array(doc["bounding_box"], dtype=float),
            hint=None if "hint" not in doc else np.array(doc["hint"], dtype=float),
        )
    except DikinError as exc:
        raise ParseError(str(exc)) from exc
    sampler = SamplerConfig(**doc.get("sampler", {}))
    return ProblemFile(spec=spec, sampler=sampler, output=dict(doc.get("output", {})), name=doc.get("name"), raw=doc)


def load_problem(path) -> ProblemFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_problem(doc)


def _arr(a):
    return np.asarray(a, dtype=float).tolist()


def serialize(pf: ProblemFile | ProblemSpec) -> dict:
    """Inverse of parse_problem; the result validates against SCHEMA."""
    if isinstance(pf, ProblemSpec):
        pf = ProblemFile(spec=pf)
    spec = pf.spec
    doc: dict = {"version": FORMAT_VERSION}
    if pf.name is not None:
        doc["name"] = pf.name
    doc["dimension"] = spec.dim
    cons = []
    for c in spec.constraints:
        if isinstance(c, Linear):
            cons.append({"type": "linear", "A": _arr(c.A), "b": _arr(c.b), "metric": c.metric})
        elif isinstance(c, Ellipsoid):
            cons.append({"type": "ellipsoid", "Q": _arr(c.Q), "p": _arr(c.p), "l": float(c.l)})
        else:
            cons.append({"type": "psd", "n": c.n, "offset": c.offset})
    doc["constraints"] = cons
    pots = []
    for p in spec.potentials:
        if isinstance(p, LinearPotential):
            pots.append({"type": "linear", "c": _arr(p.c)})
        elif isinstance(p, (QuadraticPotential, NormPotential)):
            kind = "quadratic" if isinstance(p, QuadraticPotential) else "norm"
            pots.append({"type": kind, "Sigma": _arr(p.Sigma), "mu": _arr(p.mu)})
        elif isinstance(p, LogDetPotential):
            pots.append({"type": "logdet", "n": p.n, "offset": p.offset})
        else:
            kind = {EntropyPotential: "entropy", PowerPotential: "power", LogPotential: "log",
                    ExpPotential: "exp"}[type(p)]
            t = {"type": kind, "index": None if p.index is None else [int(i) for i in p.index]}
            if isinstance(p, PowerPotential):
                t["p"] = float(p.p)
            pots.append(t)
    doc["potentials"] = pots
    if spec.bounding_box is not None:
        doc["bounding_box"] = _arr(spec.bounding_box)
    if spec.hint is not None:
        doc["hint"] = _arr(spec.hint)
    doc["sampler"] = {k: v for k, v in asdict(pf.sampler).items() if v is not None}
    if pf.output:
        doc["output"] = dict(pf.output)
    return doc


def dump_problem(pf, path) -> None:
    Path(path).write_text(json.dumps(serialize(pf), indent=2) + "\n", encoding="utf-8")


# -- presets ---------------------------------------------------------------------


def _box(d, lo=0.0, hi=1.0):
    return {"type": "linear", "A": np.vstack([np.eye(d), -np.eye(d)]).tolist(), "b": [lo] * d + [-hi] * d}


def _preset_docs() -> dict:
    tri = {"type": "linear", "A": [[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], "b": [0.0, 0.0, -1.0]}
    hexagon = np.array([[np.cos(k * np.pi / 3), np.sin(k * np.pi / 3)] for k in range(6)])
    return {
        "box": {"name": "uniform on the unit square", "dimension": 2, "constraints": [_box(2)]},
        "triangle": {"name": "uniform on the unit simplex", "dimension": 2, "constraints": [tri]},
        "exponential-box": {
            "name": "exp(-x1-x2) on [0,5]^2", "dimension": 2, "constraints": [_box(2, 0.0, 5.0)],
            "potentials": [{"type": "linear", "c": [1.0, 1.0]}],
        },
        "truncated-gaussian": {
            "name": "standard Gaussian restricted to [-1, 2]", "dimension": 1,
            "constraints": [{"type": "linear", "A": [[1.0], [-1.0]], "b": [-1.0, -2.0]}],
            "potentials": [{"type": "quadratic", "Sigma": [[1.0]], "mu": [0.0]}],
        },
        "gaussian-polytope": {
            "name": "Gaussian on a hexagon", "dimension": 2,
            "constraints": [{"type": "linear", "A": (-hexagon).tolist(), "b": [-1.0] * 6}],
            "potentials": [{"type": "quadratic", "Sigma": [[2.0, 0.5], [0.5, 1.0]], "mu": [0.2, -0.1]}],
        },
        "entropy-simplex": {
            "name": "entropy potential on the simplex", "dimension": 2, "constraints": [tri],
            "potentials": [{"type": "entropy", "index": None}],
        },
        "psd-trace": {
            "name": "uniform on {X psd, tr X <= 1}, n = 2", "dimension": 3,
            "constraints": [{"type": "psd", "n": 2, "offset": 0},
                            {"type": "linear", "A": [[-1.0, 0.0, -1.0]], "b": [-1.0]}],
        },
    }


PRESETS = tuple(_preset_docs())


def preset(name: str) -> dict:
    """JSON document for a named preset."""
    docs = _preset_docs()
    if name not in docs:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(docs)}")
    return {"version": FORMAT_VERSION, **docs[name]}


def load_preset(name: str) -> ProblemFile:
    return parse_problem(preset(name))
