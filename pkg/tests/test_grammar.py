from fractions import Fraction

import pytest

from ddsacheck.constraints import Sort, Tag, Var, canonicalize, congruent, conj, disj, eq, ge, gt, lt, term
from ddsacheck.grammar import ParseError, parse_constraint, parse_guard, tokenize

RAT = {"x": Sort.RAT, "y": Sort.RAT}


def test_tokenize_positions():
    toks = tokenize("x' >= 1/2")
    assert [(t.text, t.pos) for t in toks[:-1]] == [("x", 0), ("'", 1), (">=", 3), ("1/2", 6)]
    assert toks[-1].kind == "EOF"


def test_guard_tags():
    f = parse_guard("x' > y", RAT)
    assert canonicalize(f) == canonicalize(gt(Var("x", Sort.RAT, Tag.WRITE), Var("y", Sort.RAT, Tag.READ)))


def test_constraint_with_coefficients_and_fractions():
    f = parse_constraint("2*x + 1/2 <= y", RAT)
    x, y = Var("x", Sort.RAT), Var("y", Sort.RAT)
    assert canonicalize(f) == canonicalize(conj(ge(y, term(x).scale(2) + term(Fraction(1, 2)))))


def test_congruence_syntax():
    ints = {"u": Sort.INT, "v": Sort.INT}
    f = parse_guard("u' % 7 = v", ints)
    u, v = Var("u", Sort.INT, Tag.WRITE), Var("v", Sort.INT, Tag.READ)
    assert canonicalize(f) == canonicalize(congruent(u, v, 7))


@pytest.mark.parametrize(
    "text, pos",
    [
        ("x < ", 4),
        ("x < y )", 6),
        ("z > 1", 0),
        ("x + * 2", 4),
    ],
)
def test_error_positions(text, pos):
    with pytest.raises(ParseError) as info:
        parse_constraint(text, RAT, where="t")
    assert info.value.pos == pos
    assert str(info.value).startswith("t: ")
    assert f"column {pos + 1}" in str(info.value)


def test_primed_variable_outside_guard():
    with pytest.raises(ParseError, match="only allowed in guards"):
        parse_constraint("x' > y", RAT)


def test_congruence_needs_integers():
    with pytest.raises(ParseError, match="integer"):
        parse_constraint("x % 3 = 1", RAT)


def test_boolean_structure():
    f = parse_constraint("!(x < 1) && (y = 2 || x = y)", RAT)
    x, y = Var("x", Sort.RAT), Var("y", Sort.RAT)
    assert canonicalize(f) == canonicalize(conj(ge(x, 1), disj(eq(y, 2), eq(x, y))))
