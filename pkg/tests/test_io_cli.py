import json
import subprocess
import sys

import numpy as np
import pytest

from dikin.cli import read_samples, run_cli
from dikin.errors import ParseError
from dikin.io import PRESETS, dump_problem, load_problem, parse_problem, preset, serialize
from dikin.model import Linear, QuadraticPotential

BOX = {
    "version": "1",
    "dimension": 2,
    "constraints": [{"type": "linear", "A": [[1, 0], [0, 1], [-1, 0], [0, -1]], "b": [0, 0, -1, -1]}],
}


def _write(tmp_path, doc, name="p.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_minimal_box(tmp_path):
    pf = load_problem(_write(tmp_path, BOX))
    assert pf.spec.dim == 2 and not pf.spec.potentials
    (c,) = pf.spec.constraints
    assert isinstance(c, Linear) and c.metric == "log"
    assert pf.sampler.n > 0


def test_missing_dimension(tmp_path):
    doc = {k: v for k, v in BOX.items() if k != "dimension"}
    with pytest.raises(ParseError) as ei:
        load_problem(_write(tmp_path, doc))
    assert "dimension" in str(ei.value)


@pytest.mark.parametrize("mutate,where", [
    (lambda d: d["constraints"][0]["A"][0].__setitem__(1, "x"), "$.constraints[0].A[0][1]"),
    (lambda d: d.__setitem__("extra", 1), "$"),
    (lambda d: d["constraints"][0].__setitem__("b", [0, 0, 0]), "$.constraints[0]"),
    (lambda d: d.__setitem__("sampler", {"laziness": 0.3}), "$.sampler.laziness"),
])
def test_errors_carry_location(mutate, where):
    doc = json.loads(json.dumps(BOX))
    mutate(doc)
    with pytest.raises(ParseError) as ei:
        parse_problem(doc)
    assert ei.value.location.startswith(where)


def test_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{ not json")
    with pytest.raises(ParseError):
        load_problem(p)
    with pytest.raises(ParseError):
        load_problem(tmp_path / "missing.json")


@pytest.mark.parametrize("name", PRESETS)
def test_preset_round_trip(name, tmp_path):
    pf = parse_problem(preset(name))
    p = tmp_path / "out.json"
    dump_problem(pf, p)
    again = load_problem(p)
    assert serialize(again) == serialize(pf)


def test_gaussian_polytope_preset():
    pf = parse_problem(preset("gaussian-polytope"))
    assert isinstance(pf.spec.potentials[0], QuadraticPotential)


def test_cli_usage_errors(capsys):
    assert run_cli([]) == 2
    assert run_cli(["sample"]) == 2
    assert run_cli(["certify", "--barrier", "nope"]) == 2
    assert run_cli(["sample", "--preset", "box", "--n", "0"]) == 2


def test_cli_runtime_error(tmp_path, capsys):
    assert run_cli(["sample", "--problem", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_cli_sample_deterministic(tmp_path):
    prob = _write(tmp_path, BOX, "box.json")
    outs = []
    for k in range(2):
        out = tmp_path / f"s{k}.jsonl"
        assert run_cli(["sample", "--problem", str(prob), "--n", "200", "--seed", "7", "--out", str(out),
                        "--inner-budget", "10"]) == 0
        outs.append(out)
    assert outs[0].read_bytes() == outs[1].read_bytes()
    meta0 = outs[0].with_name(outs[0].name + ".meta.json").read_bytes()
    meta1 = outs[1].with_name(outs[1].name + ".meta.json").read_bytes()
    assert meta0 == meta1
    meta = json.loads(meta0)
    assert meta["seed"] == 7 and meta["metric"]["nu"] == 4.0
    assert meta["metric"]["parts"][0]["scaling"] == 1.0
    x = read_samples(outs[0])
    assert x.shape == (200, 2) and np.all((x > 0) & (x < 1))


def test_cli_sample_csv_and_chains(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli(["sample", "--preset", "triangle", "--n", "50", "--seed", "1", "--out", str(out),
                    "--format", "csv", "--chains", "2", "--inner-budget", "10"]) == 0
    x = read_samples(out)
    assert x.shape == (100, 2)


def test_cli_walk(tmp_path):
    out = tmp_path / "w.jsonl"
    assert run_cli(["walk", "--preset", "box", "--start", "0.5,0.5", "--n", "300", "--seed", "2",
                    "--out", str(out)]) == 0
    assert read_samples(out).shape == (300, 2)
    assert run_cli(["walk", "--preset", "box", "--start", "0.5", "--out", str(out)]) == 1


def test_cli_certify(tmp_path, capsys):
    out = tmp_path / "c.json"
    assert run_cli(["certify", "--barrier", "psd", "--n", "10", "--asc-draws", "10", "--out", str(out)]) == 0
    block = json.loads(out.read_text())
    props = {c["property"]: c for c in block["psd"]["certificates"]}
    assert props["SSC"]["passed"] is True
    assert "SSC" in capsys.readouterr().out


def test_cli_compare(tmp_path, capsys):
    samples = tmp_path / "u.jsonl"
    rng = np.random.default_rng(99)  # the oracle uses seed 0; keep the streams apart
    samples.write_text("".join(json.dumps(list(r)) + "\n" for r in rng.uniform(0, 1, (500, 2))))
    out = tmp_path / "cmp.json"
    assert run_cli(["compare", "--preset", "box", "--samples", str(samples), "--n", "2000", "--out", str(out)]) == 0
    rep = json.loads(out.read_text())
    assert not rep["flagged"]


def test_cli_bench(tmp_path):
    out = tmp_path / "bench.csv"
    assert run_cli(["bench", "--family", "polytope", "--dims", "2..4", "--n", "200", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("family,d,dim") and len(lines) == 4
    assert out.with_suffix(".svg").read_text().startswith("<svg")
    assert run_cli(["bench", "--family", "psd", "--dims", "2,3", "--n", "100", "--out", str(out)]) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "dikin", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "sample" in r.stdout
