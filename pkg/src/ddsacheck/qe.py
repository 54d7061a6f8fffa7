"""Routing of existential quantifier elimination between FM and the solver."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .constraints import (
    FALSE,
    TRUE,
    And,
    Atom,
    BlowupError,
    Formula,
    LinExpr,
    Or,
    Rel,
    Var,
    atom_is_mc,
    atoms,
    canonicalize,
    conj_all,
    disj_all,
    free_vars,
    substitute,
)
from .fm import DEFAULT_CAP, fm_eliminate
from .smt import SolverSession


@dataclass
class QeStats:
    fm_calls: int = 0
    solver_calls: int = 0
    substitutions: int = 0

    def merge(self, other: "QeStats") -> None:
        self.fm_calls += other.fm_calls
        self.solver_calls += other.solver_calls
        self.substitutions += other.substitutions


class QeEngine:
    """``eliminate(vars, f)`` returns a quantifier-free equivalent of ``∃vars. f``.

    Cheap rewrites run first (disjunct splitting, dropping conjuncts that do
    not mention the variables, equality substitution). What remains goes to
    Fourier–Motzkin when every atom is an MC over ℚ/ℝ and to solver QE
    otherwise, or always to the solver when ``force_solver`` is set.
    """

    def __init__(self, session: SolverSession, force_solver: bool = False, cap: int = DEFAULT_CAP):
        self.session = session
        self.force_solver = force_solver
        self.cap = cap
        self.stats = QeStats()

    def eliminate(self, vars: Iterable[Var], f: Formula) -> Formula:
        f = canonicalize(f)
        targets = set(vars) & free_vars(f)
        if not targets:
            return f
        return canonicalize(self._elim(targets, f))

    def _elim(self, targets: set[Var], f: Formula) -> Formula:
        targets = targets & free_vars(f)
        if not targets:
            return f
        if isinstance(f, Or):
            return disj_all(self._elim(targets, g) for g in f.args)
        parts = list(f.args) if isinstance(f, And) else [f]
        keep = [p for p in parts if not (free_vars(p) & targets)]
        mine = [p for p in parts if free_vars(p) & targets]
        body = conj_all(mine)
        sub = _find_substitution(targets, mine)
        if sub is not None:
            v, value = sub
            self.stats.substitutions += 1
            rest = canonicalize(substitute(body, {v: value}))
            return conj_all(keep + [self._elim(targets - {v}, rest)])
        return conj_all(keep + [self._project(targets, body)])

    def _project(self, targets: set[Var], f: Formula) -> Formula:
        order = sorted(targets, key=lambda v: v.key)
        if not self.force_solver and _fm_applicable(order, f):
            try:
                self.stats.fm_calls += 1
                return fm_eliminate(order, f, self.cap)
            except BlowupError:
                pass
        self.stats.solver_calls += 1
        return self.session.solver_eliminate(order, f)


def _fm_applicable(targets: list[Var], f: Formula) -> bool:
    if any(v.sort.is_int for v in targets):
        return False
    return all(atom_is_mc(a) for a in atoms(f))


def _find_substitution(targets: set[Var], conjuncts: list[Formula]):
    """An equality conjunct ``v = e`` usable to eliminate a target ``v``."""
    for c in conjuncts:
        if not (isinstance(c, Atom) and c.rel is Rel.EQ):
            continue
        d = c.lhs - c.rhs
        for v, coef in d.coeffs:
            if v not in targets:
                continue
            if v.sort.is_int and abs(coef) != 1:
                continue
            rest = d - LinExpr({v: coef})
            value = rest.scale(Fraction(-1) / coef)
            if v.sort.is_int and (
                any(k.denominator != 1 for _, k in value.coeffs) or value.const.denominator != 1
            ):
                continue
            return v, value
    return None
