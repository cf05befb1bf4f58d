import csv
import json

import pytest

from quadratura.cli import main, resolve_seed
from quadratura.errors import ProblemFileError
from quadratura.problemfile import parse_box, parse_problem

PROBLEM = """\
[tolerances]
ode_tol = 1e-10

[system three]
x0 = 0
interval = 0, 2
phi1 = 1
phi2 = cos(x)
phi3 = x*exp(u1)   # the middle quadrature is dead

[integral three]
system = three
F = exp(-v1)*v3

[system two]
interval = 0, 2
phi1 = 1
phi2 = x*exp(u1)

[integral two]
system = two
F = exp(-v1)*v2

[system dep]
interval = 0, 2
phi1 = 1
phi2 = 1

[integral dep]
system = dep
F = v1 + v2

[system bad]
interval = 0, 2
phi1 = 1
phi2 = x

[integral bad]
system = bad
F = v1^2 + v2

[linear lin]
p = 1
q = x
interval = 0, 2

[secondorder one]
Q = 1
interval = 0, 2

[secondorder airy]
Q = x
interval = 0, 2
"""


@pytest.fixture
def problem(tmp_path):
    path = tmp_path / "problem.ini"
    path.write_text(PROBLEM)
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    return code, capsys.readouterr()


# -- problem files ----------------------------------------------------------

def test_parse_problem_sections():
    pf = parse_problem(PROBLEM)
    assert set(pf.systems) == {"three", "two", "dep", "bad"}
    assert pf.integral("three").F.free_vars() == {"v1", "v3"}
    assert pf.linear("lin").eq.x0 == 0.0
    assert pf.secondorder("airy").u0 == 0.0 and pf.secondorder("airy").du0 == 1.0
    assert pf.tol.ode_tol == 1e-10


@pytest.mark.parametrize("text", [
    "[integral a]\nsystem = nowhere\nF = v1\n",
    "[system a]\ninterval = 0, 1\nphi1 = 1\ncolour = red\n",
    "[mystery a]\nx = 1\n",
    "[system a]\ninterval = 0, 1\nphi1 = 1 +\n",
    "[system a]\ninterval = 0\nphi1 = 1\n",
])
def test_malformed_problem_files(text):
    with pytest.raises(ProblemFileError):
        parse_problem(text)


def test_parse_box():
    assert parse_box("-1, 1; 0, 2").bounds == ((-1.0, 1.0), (0.0, 2.0))
    with pytest.raises(ProblemFileError):
        parse_box("1, 0")


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("QUADRATURA_SEED", "7")
    assert resolve_seed(3) == 3
    assert resolve_seed(None) == 7
    monkeypatch.delenv("QUADRATURA_SEED")
    assert resolve_seed(None) == 20240917


# -- exit codes -------------------------------------------------------------

def test_check_passes(problem, capsys):
    code, out = run(capsys, "check", problem, "three")
    assert code == 0
    assert "seed" in out.out


def test_check_dependent_system_fails(problem, capsys):
    code, out = run(capsys, "check", problem, "dep")
    assert code == 1
    assert "FAIL" in out.out


def test_missing_reference_is_usage_error(tmp_path, capsys):
    path = tmp_path / "p.ini"
    path.write_text("[integral a]\nsystem = nowhere\nF = v1\n")
    code, out = run(capsys, "check", path, "a")
    assert code == 2 and "nowhere" in out.err


def test_unknown_target_and_subcommand(problem, capsys):
    assert run(capsys, "check", problem, "absent")[0] == 2
    assert run(capsys, "frobnicate", problem)[0] == 2
    assert run(capsys, "check", problem)[0] == 2
    assert run(capsys, "check", problem, "two", "--grid", "0")[0] == 2


def test_missing_file(tmp_path, capsys):
    assert run(capsys, "check", tmp_path / "absent.ini", "a")[0] == 2


# -- reduce -----------------------------------------------------------------

def test_reduce_writes_artifacts(problem, tmp_path, capsys):
    out = tmp_path / "out"
    code, _ = run(capsys, "reduce", problem, "three", "--out", out)
    assert code == 0
    assert {p.name for p in out.iterdir()} >= {"normalform.txt", "trace.txt", "trace.jsonl",
                                               "equivalence.txt"}
    records = [json.loads(line) for line in (out / "trace.jsonl").read_text().splitlines()]
    assert [r["rule"] for r in records if "rule" in r] == [
        "reduce-A-case1", "reduce-A-case2", "terminal-2quad"]
    assert records[-1]["final_equivalence_gap"] < 1e-6
    nf = (out / "normalform.txt").read_text()
    assert "p: 1\n" in nf and "q: x\n" in nf


def test_reduce_non_one_parametric(problem, tmp_path, capsys):
    code, out = run(capsys, "reduce", problem, "bad", "--out", tmp_path)
    assert code == 1
    assert "Fundamental-Equality structure absent" in out.out + out.err
    assert (tmp_path / "trace.txt").exists()


def test_reduce_is_deterministic(problem, tmp_path, capsys):
    for name in ("a", "b"):
        assert run(capsys, "reduce", problem, "two", "--out", tmp_path / name, "--seed", "5")[0] == 0
    for f in ("normalform.txt", "trace.txt", "trace.jsonl", "equivalence.txt"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_seed_from_environment(problem, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("QUADRATURA_SEED", "123")
    run(capsys, "reduce", problem, "two", "--out", tmp_path)
    assert "seed: 123" in (tmp_path / "equivalence.txt").read_text()


# -- other subcommands ------------------------------------------------------

def test_prufer_csv(problem, tmp_path, capsys):
    code, _ = run(capsys, "prufer", problem, "one", "--out", tmp_path)
    assert code == 0
    with open(tmp_path / "prufer.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "theta", "logrho", "u", "du"]
    assert len(rows) == 34
    assert "witness" in (tmp_path / "prufer.txt").read_text()


def test_prufer_nonconstant_reports_obstruction(problem, tmp_path, capsys):
    code, _ = run(capsys, "prufer", problem, "airy", "--out", tmp_path)
    assert code == 0
    assert "obstruction" in (tmp_path / "prufer.txt").read_text()


def test_solve_linear(problem, tmp_path, capsys):
    code, _ = run(capsys, "solve-linear", problem, "lin", "--out", tmp_path, "--grid", "5")
    assert code == 0
    with open(tmp_path / "linear.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert float(rows[2]["y"]) == pytest.approx(0.36787944117, abs=1e-9)


def test_equiv(problem, capsys):
    assert run(capsys, "equiv", problem, "three", "two")[0] == 0
    assert run(capsys, "equiv", problem, "two", "dep")[0] == 1
