from __future__ import annotations

import io
import json

import pytest

from ncatoms.cli import run


def _spec_file(tmp_path, *measures, name="spec.json"):
    variables = [{"atoms": [{"at": str(a), "weight": str(w)} for a, w in m.items()]} for m in measures]
    path = tmp_path / name
    path.write_text(json.dumps({"variables": variables}))
    return str(path)


def _run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_atoms_anticommutator(tmp_path):
    spec = _spec_file(tmp_path, {0: "3/4", 1: "1/4"}, {0: "3/4", 1: "1/4"})
    code, out, err = _run("atoms", "-e", "x1*x2 + x2*x1", "-m", spec)
    assert code == 0 and not err
    report = json.loads(out)
    assert report["atoms"] == [{"at": "0", "weight": "1/2"}]
    prov = report["provenance"]
    assert prov["agreement"] and prov["n"] == 4
    assert set(prov) >= {"engine", "prime", "blowup_sizes", "trials", "resamples_due_to_poles", "candidates"}


def test_output_is_deterministic(tmp_path):
    spec = _spec_file(tmp_path, {0: "1/2", 1: "1/2"}, {0: "1/3"})
    first = _run("atoms", "-e", "x1 + x2", "-m", spec, "--seed", "3")
    assert _run("atoms", "-e", "x1 + x2", "-m", spec, "--seed", "3") == first


def test_rank(tmp_path):
    spec = _spec_file(tmp_path, {0: "1/2", 1: "1/2"}, {0: "1/2", 1: "1/2"})
    code, out, _ = _run("rank", "-e", "x1*x2", "-m", spec)
    assert code == 0 and json.loads(out)["rank"] == "1/2"


def test_closedform_rules(tmp_path):
    spec = _spec_file(tmp_path, {0: "2/3", 1: "1/3"}, {0: "2/3", 2: "1/3"})
    code, out, _ = _run("closedform", "--rule", "add", "-m", spec)
    assert code == 0 and json.loads(out)["atoms"] == [{"at": "0", "weight": "1/3"}]
    code, _, err = _run("closedform", "--rule", "multcomm", "-m", spec)
    assert code == 2 and json.loads(err)["error"] == "spec"
    code, out, _ = _run("closedform", "--rule", "injective", "-e", "x1 + x2", "-m", spec)
    assert code == 0 and json.loads(out)["atoms"] == [{"at": "0", "weight": "1/3"}]


def test_approximation_flag(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"variables": [{"atoms": [{"at": "0", "weight": 0.34}]}]}))
    code, _, _ = _run("atoms", "-e", "x1", "-m", str(path))
    assert code == 2
    code, out, _ = _run("atoms", "-e", "x1", "-m", str(path), "--approx-N", "6")
    report = json.loads(out)
    assert code == 0 and report["atoms"] == [{"at": "0", "weight": "1/3"}]
    assert report["provenance"]["approximation_level"] == 6


def test_simulate(tmp_path):
    spec = _spec_file(tmp_path, {0: "1/2", 2: "1/4"})
    code, out, _ = _run("simulate", "-e", "x1", "-m", spec, "--size", "40", "--trials", "2")
    report = json.loads(out)
    assert code == 0 and report["m"] == 40
    got = {a["at"]: a["weight"] for a in report["atoms"]}
    assert got["0"] == pytest.approx(0.5) and got["2"] == pytest.approx(0.25)


def test_cover(tmp_path):
    path = tmp_path / "c4.txt"
    path.write_text("0 1\n1 2\n2 3\n3 0\n")
    code, out, _ = _run("cover", "-g", str(path))
    report = json.loads(out)
    assert code == 0 and report["inequality_holds"]
    assert [a["weight"] for a in report["atoms"]] == ["0", "0", "0"]
    path.write_text("0 1\n2 3\n")
    assert _run("cover", "-g", str(path))[0] == 2


def test_validate_suite():
    code, out, _ = _run("validate", "--suite", "linrep")
    assert code == 0 and json.loads(out)["ok"]


def test_error_codes(tmp_path):
    spec = _spec_file(tmp_path, {0: "2/3", 1: "1/3"}, {0: "2/3", 1: "1/3"})
    code, out, err = _run("atoms", "-e", "x1 + * x2", "-m", spec)
    assert code == 1 and not out and json.loads(err)["position"] == 5
    assert _run("atoms", "-e", "x1", "-m", str(tmp_path / "missing.json"))[0] == 2
    assert _run("atoms", "-e", "x3", "-m", spec)[0] == 2
    assert _run("atoms", "-e", "(x1 + x2)^-1", "-m", spec)[0] == 3
