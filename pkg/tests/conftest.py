from __future__ import annotations

from pathlib import Path

import pytest

from ddsacheck.constraints import Sort, Tag, Var
from ddsacheck.ddsa import load_ddsa
from ddsacheck.grammar import parse_constraint
from ddsacheck.qe import QeEngine
from ddsacheck.smt import SolverSession

MODELS = Path(__file__).resolve().parent.parent / "models"


@pytest.fixture(scope="session")
def session():
    s = SolverSession()
    yield s
    s.close()


@pytest.fixture(scope="session")
def qe(session):
    return QeEngine(session)


@pytest.fixture(scope="session")
def model_b():
    return load_ddsa(MODELS / "example2_b.json")


@pytest.fixture(scope="session")
def model_b_strict():
    return load_ddsa(MODELS / "example2_b_strict.json")


@pytest.fixture(scope="session")
def model_ipc():
    return load_ddsa(MODELS / "example2_ipc.json")


@pytest.fixture(scope="session")
def model_bl():
    return load_ddsa(MODELS / "example2_bl.json")


@pytest.fixture(scope="session")
def road_fines():
    return load_ddsa(MODELS / "roadfines.json")


def rat(name, tag=Tag.PLAIN):
    return Var(name, Sort.RAT, tag)


def c(text, names=("x", "y"), sort=Sort.RAT):
    """Constraint over plain variables; ``x0`` style names are initial copies."""
    variables = {n: sort for n in names}
    f = parse_constraint(text, variables, where="test")
    return f


def with_initial(f, names=("x", "y"), sort=Sort.RAT):
    """Rename ``n0`` variables of a parsed constraint to initial copies."""
    from ddsacheck.constraints import rename

    mapping = {Var(n + "0", sort): Var(n, sort, Tag.INITIAL) for n in names}
    return rename(f, {k: v for k, v in mapping.items()})


def hist(text, names=("x", "y"), sort=Sort.RAT):
    """Parse a formula over ``V ∪ V0`` where initial copies are written ``x0``."""
    allnames = list(names) + [n + "0" for n in names]
    return with_initial(c(text, allnames, sort), names, sort)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Print one acceptance line now and repeat it in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def emit(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
