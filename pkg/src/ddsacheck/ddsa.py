"""Data-aware dynamic systems: model, concrete steps, update and history constraints."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .constraints import (
    FALSE,
    TRUE,
    ConstraintError,
    Formula,
    LinExpr,
    Sort,
    Tag,
    Var,
    canonicalize,
    conj_all,
    eq,
    evaluate,
    free_vars,
    rename,
)
from .grammar import ParseError, parse_guard

log = logging.getLogger(__name__)

# identifiers with a meaning in the property language
RESERVED_NAMES = frozenset({"E", "A", "X", "G", "F", "U", "state", "true", "false"})


class ModelError(ValueError):
    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class Action:
    name: str
    guard: Formula

    @property
    def writes(self) -> frozenset[str]:
        return frozenset(v.name for v in free_vars(self.guard) if v.tag is Tag.WRITE)


@dataclass(frozen=True)
class Configuration:
    state: str
    values: Mapping[str, Fraction]


@dataclass
class Ddsa:
    variables: dict[str, Sort]
    states: tuple[str, ...]
    initial: str
    finals: frozenset[str]
    actions: dict[str, Action]
    transitions: tuple[tuple[str, str, str], ...]
    init: dict[str, Fraction] | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    # structure ----------------------------------------------------------
    def validate(self) -> None:
        if len(set(self.states)) != len(self.states):
            raise ModelError("duplicate state names", "states")
        if self.initial not in self.states:
            raise ModelError(f"initial state {self.initial!r} is not declared", "initial")
        for b in self.finals:
            if b not in self.states:
                raise ModelError(f"final state {b!r} is not declared", "final")
        for i, (src, a, dst) in enumerate(self.transitions):
            for s in (src, dst):
                if s not in self.states:
                    raise ModelError(f"unknown state {s!r}", f"transitions[{i}]")
            if a not in self.actions:
                raise ModelError(f"unknown action {a!r}", f"transitions[{i}]")
        for a in self.actions.values():
            for v in free_vars(a.guard):
                if v.name not in self.variables or self.variables[v.name] is not v.sort:
                    raise ModelError(f"guard uses undeclared variable {v.name!r}", f"action {a.name}")
                if v.tag not in (Tag.READ, Tag.WRITE):
                    raise ModelError(f"guard variable {v} must be a read or write copy", f"action {a.name}")
        if self.init is not None:
            if set(self.init) != set(self.variables):
                raise ModelError("initial assignment must cover exactly the variables", "variables")
            for name, val in self.init.items():
                if self.variables[name].is_int and val.denominator != 1:
                    raise ModelError(f"integer variable {name} has non-integral init {val}", "variables")

    def var(self, name: str, tag: Tag = Tag.PLAIN) -> Var:
        return Var(name, self.variables[name], tag)

    def vars(self, tag: Tag = Tag.PLAIN) -> list[Var]:
        return [Var(n, s, tag) for n, s in self.variables.items()]

    def outgoing(self, b: str) -> list[tuple[str, str, str]]:
        return [t for t in self.transitions if t[0] == b]

    def write(self, action: str) -> frozenset[str]:
        return self.actions[action].writes

    @property
    def has_init(self) -> bool:
        return self.init is not None

    def init_assignment(self) -> dict[Var, Fraction]:
        if self.init is None:
            raise ModelError("the model has no initial assignment")
        return {self.var(n): v for n, v in self.init.items()}

    # semantics ----------------------------------------------------------
    def transition_formula(self, action: str) -> Formula:
        """Guard plus inertia ``v' = v`` for every variable the action does not write."""
        a = self.actions[action]
        written = a.writes
        inertia = [
            eq(self.var(n, Tag.WRITE), self.var(n, Tag.READ))
            for n in self.variables
            if n not in written
        ]
        return conj_all([a.guard] + inertia)

    def step(self, c: Configuration, action: str, c2: Configuration) -> bool:
        if (c.state, action, c2.state) not in self.transitions:
            raise ModelError(f"no transition {c.state} -{action}-> {c2.state}")
        beta: dict[Var, Fraction] = {}
        for n in self.variables:
            beta[self.var(n, Tag.READ)] = Fraction(c.values[n])
            beta[self.var(n, Tag.WRITE)] = Fraction(c2.values[n])
        return evaluate(self.transition_formula(action), beta)

    def phi_nu(self) -> Formula:
        """``v = v__0`` for every variable: the history of the empty run."""
        return canonicalize(conj_all(eq(self.var(n), self.var(n, Tag.INITIAL)) for n in self.variables))

    def fresh(self, depth: int = 0) -> dict[str, Var]:
        return {
            n: Var(f"__u{i}_{depth}", s, Tag.FRESH)
            for i, (n, s) in enumerate(self.variables.items())
        }

    def update(self, phi: Formula, action: str, qe) -> Formula:
        """``∃U. phi(U) ∧ Δ_a(U, V)`` with ``U`` eliminated by the QE engine."""
        phi = canonicalize(phi)
        if phi == FALSE:
            return FALSE
        u = self.fresh(0)
        to_u = {self.var(n): u[n] for n in self.variables}
        shifted = rename(phi, to_u)
        step = {}
        for n in self.variables:
            step[self.var(n, Tag.READ)] = u[n]
            step[self.var(n, Tag.WRITE)] = self.var(n)
        delta = rename(self.transition_formula(action), step)
        return qe.eliminate(list(u.values()), conj_all([shifted, delta]))

    def history(self, run: Sequence, thetas: Sequence[Formula], qe) -> Formula:
        """History constraint of a symbolic run ``[b0, a1, b1, ..., an, bn]``."""
        states = list(run[0::2])
        actions = list(run[1::2])
        if len(thetas) != len(states):
            raise ValueError("need one verification constraint per run position")
        for i, a in enumerate(actions):
            if (states[i], a, states[i + 1]) not in self.transitions:
                raise ModelError(f"no transition {states[i]} -{a}-> {states[i + 1]}")
        h = canonicalize(conj_all([self.phi_nu(), thetas[0]]))
        for a, theta in zip(actions, thetas[1:]):
            h = canonicalize(conj_all([self.update(h, a, qe), theta]))
        return h

    # serialization ------------------------------------------------------
    def to_json(self) -> dict[str, Any]:
        return {
            "variables": [
                {
                    "name": n,
                    "sort": s.value,
                    "init": None if self.init is None else _json_num(self.init[n]),
                }
                for n, s in self.variables.items()
            ],
            "states": list(self.states),
            "initial": self.initial,
            "final": sorted(self.finals),
            "actions": [{"name": a.name, "guard": str(a.guard)} for a in self.actions.values()],
            "transitions": [list(t) for t in self.transitions],
        }

    def with_init(self, values: Mapping[str, object] | None) -> "Ddsa":
        init = None if values is None else {n: _to_fraction(v, n) for n, v in values.items()}
        return Ddsa(
            dict(self.variables), self.states, self.initial, self.finals,
            dict(self.actions), self.transitions, init, list(self.warnings),
        )


def _json_num(q: Fraction):
    return q.numerator if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _to_fraction(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ModelError("expected a number", where)
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        # JSON decimals such as 2.5 are read exactly from their shortest repr
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise ModelError(f"invalid number {value!r}", where) from None
    raise ModelError("expected a number", where)


def _expect(cond: bool, msg: str, where: str) -> None:
    if not cond:
        raise ModelError(msg, where)


def _ident(value, where: str) -> str:
    _expect(isinstance(value, str) and value != "", "expected a non-empty string", where)
    return value


def load_ddsa(doc: Mapping[str, Any] | str | Path) -> Ddsa:
    """Build a :class:`Ddsa` from a JSON document, a JSON string, or a file path."""
    if isinstance(doc, Path) or (isinstance(doc, str) and not doc.lstrip().startswith("{")):
        try:
            text = Path(doc).read_text(encoding="utf-8")
        except OSError as e:
            raise ModelError(f"cannot read model: {e}") from None
        doc = text
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as e:
            raise ModelError(f"invalid JSON: {e.msg}", f"line {e.lineno}") from None
    _expect(isinstance(doc, dict), "model must be a JSON object", "$")
    for key in ("variables", "states", "initial", "final", "actions", "transitions"):
        _expect(key in doc, f"missing key {key!r}", "$")
    unknown = set(doc) - {"variables", "states", "initial", "final", "actions", "transitions", "name", "description"}
    _expect(not unknown, f"unknown keys {sorted(unknown)}", "$")

    variables: dict[str, Sort] = {}
    inits: dict[str, Fraction | None] = {}
    _expect(isinstance(doc["variables"], list), "expected a list", "variables")
    for i, v in enumerate(doc["variables"]):
        where = f"variables[{i}]"
        _expect(isinstance(v, dict), "expected an object", where)
        name = _ident(v.get("name"), f"{where}.name")
        _expect(name.isidentifier(), f"invalid variable name {name!r}", f"{where}.name")
        _expect("__" not in name, f"variable name {name!r} uses the reserved '__'", f"{where}.name")
        _expect(name not in RESERVED_NAMES, f"variable name {name!r} is a keyword", f"{where}.name")
        _expect(name not in variables, f"duplicate variable {name!r}", f"{where}.name")
        try:
            sort = Sort(v.get("sort", "rat"))
        except ValueError:
            raise ModelError(f"unknown sort {v.get('sort')!r}", f"{where}.sort") from None
        variables[name] = sort
        init = v.get("init")
        inits[name] = None if init is None else _to_fraction(init, f"{where}.init")

    given = [n for n, x in inits.items() if x is not None]
    if given and len(given) != len(inits):
        raise ModelError("init must be given for all variables or for none", "variables")
    init = {n: x for n, x in inits.items()} if given else None

    _expect(isinstance(doc["states"], list), "expected a list", "states")
    states = tuple(_ident(s, f"states[{i}]") for i, s in enumerate(doc["states"]))
    _expect(len(states) > 0, "at least one state is required", "states")
    initial = _ident(doc["initial"], "initial")
    _expect(isinstance(doc["final"], list), "expected a list", "final")
    finals = frozenset(_ident(s, f"final[{i}]") for i, s in enumerate(doc["final"]))

    actions: dict[str, Action] = {}
    _expect(isinstance(doc["actions"], list), "expected a list", "actions")
    warnings: list[str] = []
    for i, a in enumerate(doc["actions"]):
        where = f"actions[{i}]"
        _expect(isinstance(a, dict), "expected an object", where)
        name = _ident(a.get("name"), f"{where}.name")
        _expect(name not in actions, f"duplicate action {name!r}", f"{where}.name")
        text = a.get("guard", "true")
        _expect(isinstance(text, str), "guard must be a string", f"{where}.guard")
        try:
            guard = parse_guard(text, variables, where=f"{where}.guard")
        except ParseError as e:
            raise ModelError(str(e)) from None
        if canonicalize(guard) == FALSE:
            warnings.append(f"{where}: guard of action {name!r} is unsatisfiable")
        actions[name] = Action(name, guard)

    _expect(isinstance(doc["transitions"], list), "expected a list", "transitions")
    transitions = []
    for i, t in enumerate(doc["transitions"]):
        where = f"transitions[{i}]"
        _expect(isinstance(t, list) and len(t) == 3, "expected [from, action, to]", where)
        transitions.append(tuple(_ident(x, f"{where}[{j}]") for j, x in enumerate(t)))

    for w in warnings:
        log.warning(w)
    return Ddsa(variables, states, initial, finals, actions, tuple(transitions), init, warnings)
