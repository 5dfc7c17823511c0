import csv
import json
import os
import subprocess
import sys

import pytest

from atlearn.cli import BENCH_COLUMNS, run
from atlearn.formulas import parse_formula
from atlearn.structures import Sample, kripke, serialize_sample

FAKE = os.path.join(os.path.dirname(__file__), "fake_solver.py")


def write(tmp_path, sample, name="s.json"):
    path = tmp_path / name
    path.write_bytes(serialize_sample(sample))
    return str(path)


@pytest.fixture
def p_file(tmp_path, p_sample):
    return write(tmp_path, p_sample)


@pytest.fixture
def iso_file(tmp_path):
    a = kripke({"s": ["s"]}, name="a", propositions=["p"])
    b = kripke({"s": ["s"]}, name="b", propositions=["p"])
    return write(tmp_path, Sample.of([a], [b]), "iso.json")


def test_learn_ctl_prints_p(p_file, capsys):
    assert run(["learn", "--sample", p_file, "--mode", "ctl", "--max-size", "8"]) == 0
    assert capsys.readouterr().out.strip() == "p"


def test_learn_json(p_file, capsys):
    assert run(["learn", "--sample", p_file, "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["version"] == 1 and doc["command"] == "learn" and doc["exit_code"] == 0
    res = doc["result"]
    assert res["formula"] == "p" and res["size"] == 1 and res["outcome"] == "formula"
    assert all(step["encode_s"] >= 0 and step["solve_s"] >= 0 for step in res["steps"])
    assert parse_formula(res["formula"]) is parse_formula("p")


def test_learn_not_separable(iso_file, capsys):
    assert run(["learn", "--sample", iso_file]) == 1
    assert "not separable" in capsys.readouterr().out


def test_learn_budget(tmp_path, capsys):
    three = kripke({"a0": ["a1"], "a1": ["a2"], "a2": ["a2"]}, {"a2": ["p"]}, name="three")
    two = kripke({"b0": ["b1"], "b1": ["b1"]}, name="two", propositions=["p"])
    path = write(tmp_path, Sample.of([three], [two]))
    assert run(["learn", "--sample", path, "--budget-n", "2"]) == 3
    assert "budget exhausted" in capsys.readouterr().out


def test_learn_external_solver_and_dimacs(p_file, tmp_path, capsys):
    cmd = f"{sys.executable} {FAKE}"
    out_dir = tmp_path / "cnf"
    assert run(["learn", "--sample", p_file, "--solver-cmd", cmd, "--dimacs-dir", str(out_dir),
                "--budget-n", "2"]) == 0
    assert capsys.readouterr().out.strip() == "p"
    assert (out_dir / "n2.cnf").read_text().startswith("p cnf")
    names = json.loads((out_dir / "n1.vars.json").read_text())
    assert names["x[1,prop:p]"] == 1


def test_usage_errors(p_file, capsys):
    assert run([]) == 2
    assert run(["learn", "--sample", p_file, "--ops", "not,W"]) == 2
    assert run(["learn", "--sample", p_file, "--mode", "ctl", "--pre", "general"]) == 2
    assert run(["check", "--sample", p_file, "--formula", "p &"]) == 2
    assert run(["learn", "--sample", "/nonexistent.json"]) == 2
    assert run(["generate"]) == 2


def test_internal_error_on_solver_failure(p_file):
    assert run(["learn", "--sample", p_file, "--solver", "nope"]) == 4


def test_check(p_file, capsys):
    assert run(["check", "--sample", p_file, "--formula", "p"]) == 0
    assert capsys.readouterr().out.strip() == "consistent"
    assert run(["check", "--sample", p_file, "--formula", "!p", "--json"]) == 1
    doc = json.loads(capsys.readouterr().out)["result"]
    assert doc["violated_by"] == "pos" and doc["polarity"] == "positive"


def test_check_generated_suite_sample(tmp_path, capsys):
    out = tmp_path / "suite"
    assert run(["generate", "--suite", "ctl", "--out", str(out), "--counts", "6", "--caps", "4"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    entry = next(e for e in manifest["samples"] if e["formula"] == "AG(AF(p))")
    assert run(["check", "--sample", str(out / entry["file"]), "--formula", "AG(AF(p))"]) == 0


def test_separability(iso_file, p_file, tmp_path, capsys):
    assert run(["separability", "--sample", iso_file]) == 1
    assert capsys.readouterr().out.strip() == "not separable"
    dump = tmp_path / "rel.json"
    assert run(["separability", "--sample", p_file, "--witness", "--dump-relation", str(dump), "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)["result"]
    assert doc["separable"] and doc["witness"] == "p" and doc["decider"] == "full"
    assert json.loads(dump.read_text()) == [["0:s0", "1:s0"], ["1:s0", "0:s0"]]
    assert run(["separability", "--sample", p_file, "--ops", "and", "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["result"]["decider"] == "fragment"


def test_separability_without_positives(tmp_path, capsys):
    path = write(tmp_path, Sample.of([], [kripke({"s": ["s"]}, {"s": ["p"]})]))
    assert run(["separability", "--sample", path]) == 0
    assert "p & !p" in capsys.readouterr().out


def test_generate_seed_determines_output(tmp_path):
    args = ["generate", "--formula", "EX p", "--max-states", "4", "--positive", "2", "--negative", "2"]
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    assert run(args + ["--seed", "3", "--out", str(a)]) == 0
    assert run(args + ["--seed", "3", "--out", str(b)]) == 0
    assert run(args + ["--seed", "4", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()


def test_solver_switch_keeps_verdicts(tmp_path, capsys):
    out = tmp_path / "g.json"
    assert run(["generate", "--formula", "AG(EF(q))", "--max-states", "3", "--positive", "2",
                "--negative", "2", "--seed", "1", "--out", str(out)]) == 0
    sizes = []
    for solver in ["cadical195", "minisat22", "glucose4"]:
        capsys.readouterr()
        assert run(["learn", "--sample", str(out), "--solver", solver, "--json"]) == 0
        sizes.append(json.loads(capsys.readouterr().out)["result"]["size"])
    assert len(set(sizes)) == 1


def test_bench_csv(tmp_path, capsys):
    suite = tmp_path / "atl"
    assert run(["generate", "--suite", "atl", "--out", str(suite), "--counts", "4", "--caps", "3"]) == 0
    csv_path, formulas = tmp_path / "bench.csv", tmp_path / "found.json"
    assert run(["bench", "--manifest", str(suite), "--timeout-s", "60", "--jobs", "2",
                "--out", str(csv_path), "--formulas-out", str(formulas)]) == 0
    rows = list(csv.reader(csv_path.open()))
    assert rows[0] == BENCH_COLUMNS
    assert len(rows) == 7 and all(r[-1] == "ok" and r[1] == "atl" for r in rows[1:])
    found = json.loads(formulas.read_text())
    assert found["mode"] == "atl" and len(found["formulas"]) == 6
    capsys.readouterr()
    assert run(["bench", "--manifest", str(suite / "manifest.json"), "--max-count", "2"]) == 0
    assert capsys.readouterr().out.strip().splitlines() == [",".join(BENCH_COLUMNS)]


def test_console_script(p_file):
    proc = subprocess.run([sys.executable, "-m", "atlearn.cli", "check", "--sample", p_file, "--formula", "p"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "consistent"
