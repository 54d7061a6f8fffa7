"""Fourier–Motzkin elimination for monotonicity constraints over ℚ/ℝ.

The input is expanded to DNF; inside each disjunct equalities are used as
substitutions first, then every lower bound on the variable is paired with
every upper bound. For MC inputs the resulting atoms compare the same
variables and constants as before, so no new constants appear.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable

from .constraints import (
    FALSE,
    Atom,
    BlowupError,
    ConstraintError,
    Formula,
    LinExpr,
    Not,
    Rel,
    Var,
    atom_is_mc,
    atoms,
    canonical_atom,
    canonicalize,
    conj_all,
    disj_all,
    free_vars,
    is_quantifier_free,
    to_dnf,
)

DEFAULT_CAP = 100_000


class FMError(ConstraintError):
    """Input outside the fragment Fourier–Motzkin handles soundly."""


# A literal inside a disjunct is kept as (expr, rel) meaning ``expr rel 0``
# with rel in {"=", "<", "<=", "!="}.
_Lit = tuple[LinExpr, str]


def _to_lit(lit: Formula) -> _Lit:
    if isinstance(lit, Atom):
        return (lit.lhs - lit.rhs, lit.rel.value)
    if isinstance(lit, Not) and isinstance(lit.arg, Atom) and lit.arg.rel is Rel.EQ:
        a = lit.arg
        return (a.lhs - a.rhs, "!=")
    raise FMError(f"unexpected literal {lit}")


def _from_lit(lit: _Lit) -> Formula:
    e, rel = lit
    zero = LinExpr()
    if rel == "!=":
        c = canonical_atom(Atom(Rel.EQ, e, zero))
        return Not(c) if isinstance(c, Atom) else (~c)
    return canonical_atom(Atom(Rel(rel), e, zero))


def _split_diseq(clause: list[_Lit], targets: set[Var]) -> list[list[_Lit]]:
    """Replace ``e != 0`` mentioning a target by ``e < 0`` or ``-e < 0``."""
    out = [[]]
    for e, rel in clause:
        if rel == "!=" and e.vars & targets:
            out = [c + [(e, "<")] for c in out] + [c + [(-e, "<")] for c in out]
        else:
            out = [c + [(e, rel)] for c in out]
    return out


def _eliminate_var(v: Var, clause: list[_Lit]) -> list[_Lit] | None:
    """Project ``v`` out of a conjunction; ``None`` means the clause is empty."""
    rest = [l for l in clause if l[0].coeff(v) == 0]
    mine = [l for l in clause if l[0].coeff(v) != 0]
    if not mine:
        return clause
    for i, (e, rel) in enumerate(mine):
        if rel == "=":
            c = e.coeff(v)
            # v = -(e - c*v)/c
            value = (e - LinExpr({v: c})).scale(Fraction(-1) / c)
            sub = {v: value}
            out = list(rest)
            for j, (e2, rel2) in enumerate(mine):
                if j != i:
                    out.append((e2.substitute(sub), rel2))
            return out
    lowers: list[_Lit] = []
    uppers: list[_Lit] = []
    for e, rel in mine:
        if rel == "!=":
            raise FMError("disequality reached the bound-pairing step")
        (uppers if e.coeff(v) > 0 else lowers).append((e, rel))
    out = list(rest)
    for el, rl in lowers:
        cl = -el.coeff(v)
        for eu, ru in uppers:
            cu = eu.coeff(v)
            combined = el.scale(cu) + eu.scale(cl)
            rel = "<" if "<" in (rl, ru) else "<="
            out.append((combined, rel))
    return out


def _check_input(targets: Iterable[Var], f: Formula) -> None:
    if not is_quantifier_free(f):
        raise FMError("fm_eliminate expects a quantifier-free formula")
    for v in targets:
        if v.sort.is_int:
            raise FMError(f"cannot eliminate integer variable {v} with Fourier-Motzkin")
    for a in atoms(f):
        if not atom_is_mc(a):
            raise FMError(f"atom {a} is not a monotonicity constraint")


def fm_eliminate(vars: Iterable[Var], f: Formula, cap: int = DEFAULT_CAP) -> Formula:
    """Quantifier-free MC formula equivalent to ``∃vars. f``.

    Raises :class:`FMError` on non-MC atoms or integer variables and
    :class:`BlowupError` when the DNF exceeds ``cap`` literals.
    """
    targets = list(dict.fromkeys(vars))
    _check_input(targets, f)
    present = free_vars(f)
    targets = [v for v in targets if v in present]
    if not targets:
        return canonicalize(f)
    tset = set(targets)
    clauses = to_dnf(f, cap)
    results: list[Formula] = []
    budget = cap
    for raw in clauses:
        for clause in _split_diseq([_to_lit(l) for l in raw], tset):
            cur: list[_Lit] | None = clause
            for v in targets:
                cur = _eliminate_var(v, cur)
                budget -= len(cur)
                if budget < 0:
                    raise BlowupError("Fourier-Motzkin exceeded the literal cap")
            lits = [_from_lit(l) for l in cur]
            g = canonicalize(conj_all(lits))
            if g != FALSE:
                results.append(g)
    return canonicalize(disj_all(results))
