"""Brute-force semantics on finite fixtures.

A fixture is a DDSA with an acyclic control graph whose guards confine every
written variable to an explicit finite set, so the final runs from any
configuration can be listed exhaustively. Property and LTL evaluation follow
the finite-run clauses directly and share no code with the checker.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

from .constraints import (
    And,
    Atom,
    Formula,
    Or,
    Rel,
    Sort,
    Tag,
    Var,
    conj_all,
    disj_all,
    eq,
    evaluate,
    ge,
    gt,
    le,
    lt,
    ne,
)
from .ddsa import Action, Configuration, Ddsa
from .ltl import ConfigurationMap, LFalse, LG, LMap, LNot, LTrue, LtlK, LU, LWX, LX, eval_ltlk_positions, l_and, l_or
from .properties import (
    PActionNext,
    PAnd,
    PConstraint,
    PE,
    PFalse,
    PG,
    PNot,
    POr,
    PState,
    PTrue,
    PU,
    PWX,
    PX,
    Prop,
    p_and,
    p_exists,
    p_finally,
    p_forall,
    p_not,
    p_or,
)


class FixtureError(ValueError):
    pass


@dataclass(frozen=True)
class Run:
    configs: tuple[Configuration, ...]
    actions: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.actions)

    def __str__(self):
        parts = [_conf_str(self.configs[0])]
        for a, c in zip(self.actions, self.configs[1:]):
            parts.append(f"-{a}-> {_conf_str(c)}")
        return " ".join(parts)


def _conf_str(c: Configuration) -> str:
    vals = " ".join(f"{k}:{v}" for k, v in sorted(c.values.items()))
    return f"({c.state}, {vals})"


def _write_domain(guard: Formula, v: Var) -> list[Fraction] | None:
    """Values allowed by a conjunct of equalities ``v' = k`` (possibly a disjunction)."""
    parts = guard.args if isinstance(guard, And) else (guard,)
    for p in parts:
        alts = p.args if isinstance(p, Or) else (p,)
        vals = []
        for a in alts:
            if not (isinstance(a, Atom) and a.rel is Rel.EQ):
                break
            d = a.lhs - a.rhs
            if d.vars != frozenset({v}):
                break
            c = d.coeff(v)
            vals.append(-d.const / c)
        else:
            return sorted(set(vals))
    return None


class FiniteFixture:
    """A DDSA plus a value grid, validated for exhaustive enumeration."""

    def __init__(self, model: Ddsa, grid: Mapping[str, Sequence] | Sequence = (0, 1, 2)):
        self.model = model
        if isinstance(grid, Mapping):
            self.grid = {n: [Fraction(x) for x in grid[n]] for n in model.variables}
        else:
            self.grid = {n: [Fraction(x) for x in grid] for n in model.variables}
        self._check_acyclic()
        self.domains: dict[str, dict[str, list[Fraction]]] = {}
        for a in model.actions.values():
            doms = {}
            for n in sorted(a.writes):
                dom = _write_domain(a.guard, model.var(n, Tag.WRITE))
                if dom is None:
                    raise FixtureError(f"action {a.name}: written variable {n} is not confined to a finite set")
                doms[n] = dom
            self.domains[a.name] = doms
        self._runs: dict[tuple, list[Run]] = {}

    def _check_acyclic(self) -> None:
        succ: dict[str, set[str]] = {b: set() for b in self.model.states}
        for src, _, dst in self.model.transitions:
            succ[src].add(dst)
        color: dict[str, int] = {}

        def visit(b: str) -> None:
            color[b] = 1
            for c in succ[b]:
                if color.get(c) == 1:
                    raise FixtureError(f"control graph has a cycle through {c}")
                if c not in color:
                    visit(c)
            color[b] = 2

        for b in self.model.states:
            if b not in color:
                visit(b)

    def configurations(self) -> Iterator[Configuration]:
        """Every control state with every grid assignment."""
        names = list(self.model.variables)
        for b in self.model.states:
            for vals in itertools.product(*(self.grid[n] for n in names)):
                yield Configuration(b, dict(zip(names, vals)))

    def successors(self, c: Configuration) -> Iterator[tuple[str, Configuration]]:
        m = self.model
        for _, a, b2 in m.outgoing(c.state):
            doms = self.domains[a]
            names = list(doms)
            for vals in itertools.product(*(doms[n] for n in names)):
                values = dict(c.values)
                values.update(zip(names, vals))
                c2 = Configuration(b2, values)
                if m.step(c, a, c2):
                    yield a, c2


def _ckey(c: Configuration) -> tuple:
    return (c.state, tuple(sorted(c.values.items())))


def enumerate_runs(f: FiniteFixture, c: Configuration) -> list[Run]:
    """All runs from ``c`` that end in a final state, including the empty run."""
    key = _ckey(c)
    if key in f._runs:
        return f._runs[key]
    out: list[Run] = []
    if c.state in f.model.finals:
        out.append(Run((c,), ()))
    for a, c2 in f.successors(c):
        for r in enumerate_runs(f, c2):
            out.append(Run((c,) + r.configs, (a,) + r.actions))
    f._runs[key] = out
    return out


def _assignment(model: Ddsa, c: Configuration) -> dict[Var, Fraction]:
    return {model.var(n): Fraction(v) for n, v in c.values.items()}


def eval_ctl(f: FiniteFixture, c: Configuration, chi: Prop) -> bool:
    """Truth of state formula ``chi`` at configuration ``c``."""
    if isinstance(chi, PTrue):
        return True
    if isinstance(chi, PFalse):
        return False
    if isinstance(chi, PState):
        return c.state == chi.name
    if isinstance(chi, PConstraint):
        return evaluate(chi.formula, _assignment(f.model, c))
    if isinstance(chi, PNot):
        return not eval_ctl(f, c, chi.arg)
    if isinstance(chi, PAnd):
        return eval_ctl(f, c, chi.left) and eval_ctl(f, c, chi.right)
    if isinstance(chi, POr):
        return eval_ctl(f, c, chi.left) or eval_ctl(f, c, chi.right)
    if isinstance(chi, PE):
        return any(eval_path(f, r, 0, chi.path) for r in enumerate_runs(f, c))
    raise TypeError(f"not a state formula: {chi}")


def eval_path(f: FiniteFixture, run: Run, i: int, psi: Prop) -> bool:
    """Truth of path formula ``psi`` at position ``i`` of a final run."""
    n = run.length
    if isinstance(psi, (PTrue, PFalse, PState, PConstraint, PE)):
        return eval_ctl(f, run.configs[i], psi)
    if isinstance(psi, PNot):
        return not eval_path(f, run, i, psi.arg)
    if isinstance(psi, PAnd):
        return eval_path(f, run, i, psi.left) and eval_path(f, run, i, psi.right)
    if isinstance(psi, POr):
        return eval_path(f, run, i, psi.left) or eval_path(f, run, i, psi.right)
    if isinstance(psi, PX):
        return i < n and eval_path(f, run, i + 1, psi.arg)
    if isinstance(psi, PWX):
        return i == n or eval_path(f, run, i + 1, psi.arg)
    if isinstance(psi, PG):
        return all(eval_path(f, run, j, psi.arg) for j in range(i, n + 1))
    if isinstance(psi, PU):
        for j in range(i, n + 1):
            if eval_path(f, run, j, psi.right):
                return True
            if not eval_path(f, run, j, psi.left):
                return False
        return False
    if isinstance(psi, PActionNext):
        return i < n and run.actions[i] == psi.action and eval_path(f, run, i + 1, psi.arg)
    raise TypeError(f"not a path formula: {psi}")


def map_holds(model: Ddsa, k: ConfigurationMap, c: Configuration) -> bool:
    return evaluate(k[c.state], _assignment(model, c))


def eval_ltlk(model: Ddsa, run: Run, psi: LtlK) -> bool:
    holds = [lambda k, c=c: map_holds(model, k, c) for c in run.configs]
    return eval_ltlk_positions(psi, holds)


def run_positions(model: Ddsa, run: Run) -> list:
    """Per-position map truth, the input to NFA consistency checks."""
    return [lambda k, c=c: map_holds(model, k, c) for c in run.configs]


# --------------------------------------------------------------------------
# Random generators
# --------------------------------------------------------------------------

CONSTS = (0, 1, 2)


def _random_read_atom(rng: random.Random, vs: list[Var]) -> Formula:
    x = rng.choice(vs)
    rel = rng.choice([eq, lt, le, gt, ge, ne])
    if len(vs) > 1 and rng.random() < 0.4:
        y = rng.choice([v for v in vs if v != x])
        return rel(x, y)
    return rel(x, rng.choice(CONSTS))


def random_fixture(rng: random.Random, max_states: int = 5, max_vars: int = 2) -> FiniteFixture:
    """Acyclic guard-closed fixture over grid {0,1,2}."""
    n_states = rng.randint(2, max_states)
    states = tuple(f"s{i}" for i in range(n_states))
    sort = rng.choice([Sort.RAT, Sort.RAT, Sort.INT])
    names = ["x", "y"][: rng.randint(1, max_vars)]
    variables = {n: sort for n in names}
    transitions = []
    actions: dict[str, Action] = {}
    for i in range(n_states - 1):
        targets = rng.sample(range(i + 1, n_states), k=min(n_states - i - 1, rng.randint(1, 2)))
        for j in targets:
            name = f"a{len(actions)}"
            parts: list[Formula] = []
            if rng.random() < 0.6:
                parts.append(_random_read_atom(rng, [Var(n, sort, Tag.READ) for n in names]))
            for n in rng.sample(names, k=rng.randint(0, min(2, len(names)))):
                w = Var(n, sort, Tag.WRITE)
                vals = rng.sample(CONSTS, k=rng.randint(1, 2))
                parts.append(disj_all(eq(w, k) for k in vals))
                if rng.random() < 0.3:
                    parts.append(_random_read_atom(rng, [w] + [Var(m, sort, Tag.READ) for m in names]))
            actions[name] = Action(name, conj_all(parts))
            transitions.append((states[i], name, states[j]))
    finals = frozenset(rng.sample(states, k=rng.randint(1, max(1, n_states // 2))) + [states[-1]])
    model = Ddsa(variables, states, states[0], finals, actions, tuple(transitions))
    return FiniteFixture(model, CONSTS)


def _random_constraint(rng: random.Random, model: Ddsa) -> Formula:
    return _random_read_atom(rng, model.vars())


def random_state_formula(rng: random.Random, model: Ddsa, qd: int = 2, size: int = 3) -> Prop:
    """Random state formula with at most ``qd`` nested path quantifiers."""
    r = rng.random()
    if size <= 0 or qd == 0 or r < 0.25:
        t = rng.random()
        if t < 0.55:
            return PConstraint(_random_constraint(rng, model))
        if t < 0.85:
            return PState(rng.choice(model.states))
        return PTrue()
    if r < 0.35:
        return p_not(random_state_formula(rng, model, qd, size - 1))
    if r < 0.45:
        mk = p_and if rng.random() < 0.5 else p_or
        return mk(random_state_formula(rng, model, qd, size - 1), random_state_formula(rng, model, qd, size - 1))
    path = random_path_formula(rng, model, qd - 1, size - 1)
    return p_exists(path) if rng.random() < 0.6 else p_forall(path)


def random_path_formula(rng: random.Random, model: Ddsa, qd: int, size: int) -> Prop:
    r = rng.random()
    if size <= 0 or r < 0.2:
        return random_state_formula(rng, model, qd, 0 if size <= 0 else size - 1)
    sub = lambda: random_path_formula(rng, model, qd, size - 1)  # noqa: E731
    if r < 0.35:
        return PX(sub())
    if r < 0.5:
        return PG(sub())
    if r < 0.65:
        return p_finally(sub())
    if r < 0.75:
        return PU(sub(), sub())
    if r < 0.82:
        return PNot(sub())
    if r < 0.91:
        return PAnd(sub(), sub())
    return POr(sub(), sub())


def random_map(rng: random.Random, model: Ddsa) -> ConfigurationMap:
    entries = []
    for b in model.states:
        t = rng.random()
        if t < 0.15:
            f: Formula = disj_all([])
        elif t < 0.3:
            f = conj_all([])
        else:
            f = _random_constraint(rng, model)
        entries.append((b, f))
    return ConfigurationMap(entries)


def random_ltlk(rng: random.Random, maps: Sequence[ConfigurationMap], depth: int = 3) -> LtlK:
    """Random LTL formula over the given maps, nesting depth at most ``depth``."""
    if depth == 0 or rng.random() < 0.25:
        r = rng.random()
        if r < 0.1:
            return LTrue()
        if r < 0.15:
            return LFalse()
        return LMap(rng.choice(list(maps)))
    sub = lambda: random_ltlk(rng, maps, depth - 1)  # noqa: E731
    r = rng.random()
    if r < 0.15:
        return LNot(sub())
    if r < 0.3:
        return l_and(sub(), sub())
    if r < 0.45:
        return l_or(sub(), sub())
    if r < 0.6:
        return LX(sub())
    if r < 0.68:
        return LWX(sub())
    if r < 0.82:
        return LG(sub())
    return LU(sub(), sub())


# --------------------------------------------------------------------------
# Acyclic unrolling of the running example
# --------------------------------------------------------------------------


def example2_unrolled(loops: int = 2, values=(0, 1, 2, 3)) -> FiniteFixture:
    """The two-variable example with its loop unrolled and writes confined to ``values``."""
    x, y = Var("x", Sort.RAT, Tag.READ), Var("y", Sort.RAT, Tag.READ)
    xw, yw = x.with_tag(Tag.WRITE), y.with_tag(Tag.WRITE)
    dom = lambda v: disj_all(eq(v, k) for k in values)  # noqa: E731
    actions = {
        "a1": Action("a1", conj_all([gt(yw, 0), dom(yw)])),
        "a2": Action("a2", conj_all([ge(xw, y), dom(xw)])),
        "a3": Action("a3", eq(x, y)),
    }
    mids = [f"b2_{i}" for i in range(loops + 1)]
    states = ("b1", *mids, "b3")
    transitions = [("b1", "a1", mids[0])]
    for i in range(loops):
        transitions.append((mids[i], "a2", mids[i + 1]))
    for m in mids:
        transitions.append((m, "a3", "b3"))
    model = Ddsa({"x": Sort.RAT, "y": Sort.RAT}, states, "b1", frozenset({"b3"}), actions, tuple(transitions))
    return FiniteFixture(model, values)
