import random

import pytest

from ddsacheck.constraints import (
    Sort,
    Var,
    atoms,
    congruent,
    conj,
    disj,
    eq,
    exists,
    free_vars,
    gt,
    is_quantifier_free,
    lt,
    term,
)
from ddsacheck.qe import QeEngine

X, Y, Z = (Var(n, Sort.RAT) for n in "xyz")
U, W = Var("u", Sort.RAT), Var("w", Sort.RAT)


def test_equality_substitution(session):
    qe = QeEngine(session)
    f = conj(eq(U, term(X) + term(1)), lt(U, Y))
    g = qe.eliminate([U], f)
    assert qe.stats.substitutions == 1
    assert qe.stats.fm_calls == 0 and qe.stats.solver_calls == 0
    assert session.check_equiv(g, lt(term(X) + term(1), Y))


def test_mc_goes_to_fm(session):
    qe = QeEngine(session)
    g = qe.eliminate([U], conj(lt(X, U), lt(U, Y)))
    assert qe.stats.fm_calls == 1 and qe.stats.solver_calls == 0
    assert session.check_equiv(g, lt(X, Y))


def test_force_solver(session):
    qe = QeEngine(session, force_solver=True)
    g = qe.eliminate([U], conj(lt(X, U), lt(U, Y)))
    assert qe.stats.fm_calls == 0 and qe.stats.solver_calls == 1
    assert session.check_equiv(g, lt(X, Y))


def test_integer_goes_to_solver(session):
    qe = QeEngine(session)
    a, u = Var("a", Sort.INT), Var("u", Sort.INT)
    g = qe.eliminate([u], conj(congruent(u, a, 3), lt(a, u), lt(u, term(a) + term(3))))
    assert qe.stats.solver_calls == 1
    assert session.check_equiv(g, exists([u], conj(congruent(u, a, 3), lt(a, u), lt(u, term(a) + term(3)))))


def test_irrelevant_conjuncts_untouched(session):
    qe = QeEngine(session)
    g = qe.eliminate([U], conj(lt(X, 3), lt(U, Y)))
    assert session.check_equiv(g, lt(X, 3))


def test_disjunct_split(session):
    qe = QeEngine(session)
    f = disj(conj(eq(U, 1), lt(X, U)), conj(lt(U, X), lt(Y, U)))
    g = qe.eliminate([U], f)
    assert U not in free_vars(g)
    assert session.check_equiv(g, exists([U], f))


@pytest.mark.parametrize("seed", range(15))
def test_random_non_mc_rational(seed, session):
    rng = random.Random(seed)
    vs = [X, Y, Z, U, W]
    parts = []
    for _ in range(rng.randint(2, 4)):
        lhs = term(rng.choice(vs)).scale(rng.choice([1, 2, -1])) + term(rng.choice(vs))
        parts.append(rng.choice([lt, gt, eq])(lhs, rng.choice([0, 1, 2])))
    f = conj(*parts)
    qe = QeEngine(session)
    g = qe.eliminate([U, W], f)
    assert is_quantifier_free(g)
    assert not (free_vars(g) & {U, W})
    assert session.check_equiv(g, exists([U, W], f))
    assert all(not (a.vars & {U, W}) for a in atoms(g))
