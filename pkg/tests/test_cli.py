import subprocess
import sys

import pytest

from ddsacheck.cli import (
    EXIT_BUDGET,
    EXIT_IO,
    EXIT_MAP_ONLY,
    EXIT_MODEL,
    EXIT_PROPERTY,
    EXIT_SAT,
    EXIT_SOLVER,
    EXIT_UNSAT,
    EXIT_USAGE,
    main,
)

from conftest import MODELS

B = str(MODELS / "example2_b.json")
CHI2 = "E X (A G (x >= 2))"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_sat(capsys):
    code, out, _ = run(capsys, "check", "--model", B, "--property", CHI2, "--init", "x=3", "--init", "y=0")
    assert code == EXIT_SAT
    assert out.splitlines()[-1] == "SAT at initial configuration (b1; x=3, y=0)"
    assert "solution:" in out


def test_unsat(capsys):
    code, out, _ = run(capsys, "check", "--model", B, "--property", CHI2, "--init", "x=0", "--init", "y=0")
    assert code == EXIT_UNSAT
    assert out.splitlines()[-1].startswith("UNSAT")


def test_map_only(capsys):
    code, out, _ = run(capsys, "check", "--model", B, "--property", CHI2)
    assert code == EXIT_MAP_ONLY
    assert "initial state b1 needs: x >= 2" in out


def test_template_and_stats(capsys):
    code, out, _ = run(
        capsys, "check", "--model", B, "--template", "weak_sound:a2", "--init", "x=0", "--init", "y=0",
        "--stats", "--class",
    )
    assert code == EXIT_SAT
    assert "class: MC" in out
    header = next(line for line in out.splitlines() if line.startswith("property ") and "class" in line)
    for col in ("class", "time[s]", "checks", "|B|", "sum|N|"):
        assert col in header
    assert "chP calls" in out


def test_property_file_and_smtlib(capsys, tmp_path):
    p = tmp_path / "chi.txt"
    p.write_text(CHI2 + "\n")
    code, out, _ = run(capsys, "check", "--model", B, "--property-file", str(p), "--smtlib")
    assert code == EXIT_MAP_ONLY
    assert "(check-sat)" in out and "; state b2" in out


def test_dot_output(capsys, tmp_path):
    code, _, _ = run(capsys, "check", "--model", B, "--property", "E F (x < 2)", "--dot", str(tmp_path))
    assert code == EXIT_MAP_ONLY
    assert (tmp_path / "chp001_nfa.dot").exists()
    assert (tmp_path / "chp001_b2.dot").read_text().startswith("digraph")


def test_ipc_model(capsys):
    code, out, _ = run(capsys, "check", "--model", str(MODELS / "example2_ipc.json"),
                       "--property", "E F (state b2)", "--class", "--init", "u=0", "--init", "v=0")
    assert code == EXIT_SAT
    assert "class: IPC" in out


def test_non_decidable_class_warns(capsys):
    code, _, err = run(capsys, "check", "--model", str(MODELS / "example2_bl.json"),
                       "--property", "E X (s > 0)")
    assert code == EXIT_MAP_ONLY
    assert "termination is not guaranteed" in err


@pytest.mark.parametrize(
    "argv, code, category",
    [
        (["check", "--model", B], EXIT_USAGE, "usage"),
        (["check", "--model", B, "--property", "x > 1", "--template", "no_deadlock"], EXIT_USAGE, "usage"),
        (["frobnicate"], EXIT_USAGE, "usage"),
        (["check", "--model", B, "--property", "x > 1", "--init", "x"], EXIT_USAGE, "usage"),
        (["check", "--model", "/nonexistent.json", "--property", "x > 1"], EXIT_MODEL, "model"),
        (["check", "--model", B, "--property", "x > 1", "--init", "x=1"], EXIT_MODEL, "model"),
        (["check", "--model", B, "--property", "E (G x < 1 U y < 2"], EXIT_PROPERTY, "property"),
        (["check", "--model", B, "--template", "bogus"], EXIT_PROPERTY, "property"),
        (["check", "--model", B, "--property", "x > 1", "--solver-path", "/nonexistent/z3"], EXIT_SOLVER, "solver"),
        (["check", "--model", B, "--property", "E F (x < 2)", "--node-budget", "2"], EXIT_BUDGET, "budget"),
        (["check", "--model", B, "--property-file", "/nonexistent.txt"], EXIT_IO, "io"),
    ],
)
def test_errors(capsys, argv, code, category):
    got, _, err = run(capsys, *argv)
    assert got == code
    assert f"error [{category}]" in err


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "ddsacheck", "check", "--model", B, "--property", CHI2,
         "--init", "x=3", "--init", "y=0"],
        capture_output=True, text=True, timeout=120,
    )
    assert r.returncode == 0, r.stderr
    assert "SAT at initial configuration" in r.stdout
