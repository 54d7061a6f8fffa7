"""CTL*_f properties: syntax tree, parser, quantifier depth, ⟨a⟩ encoding, path NNF.

Concrete grammar (loosest binding first)::

    prop    := impl
    impl    := or ("->" impl)?
    or      := and (("|" | "||") and)*
    and     := until (("&" | "&&") until)*
    until   := unary ("U" until)?
    unary   := ("!" | "E" | "A" | "X" | "G" | "F" | "<" ACTION ">") unary | primary
    primary := "true" | "false" | "state" ID | "(" prop ")" | constraint-atom

``A p`` is read as ``!E!p`` and ``F p`` as ``true U p``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .constraints import (
    FALSE,
    TRUE,
    Formula,
    Sort,
    Tag,
    Var,
    conj,
    disj,
    eq,
    neg,
)
from .ddsa import Action, Ddsa, ModelError
from .grammar import ConstraintParser, ParseError, TokenStream, plain_resolver


class Prop:
    """Base of all property nodes (state and path formulas share one tree)."""

    __slots__ = ()

    def children(self) -> tuple["Prop", ...]:
        return ()


@dataclass(frozen=True)
class PTrue(Prop):
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class PFalse(Prop):
    def __str__(self):
        return "false"


@dataclass(frozen=True)
class PConstraint(Prop):
    formula: Formula

    def __str__(self):
        return f"({self.formula})"


@dataclass(frozen=True)
class PState(Prop):
    name: str

    def __str__(self):
        return f"state {self.name}"


@dataclass(frozen=True)
class PNot(Prop):
    arg: Prop

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class PAnd(Prop):
    left: Prop
    right: Prop

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class POr(Prop):
    left: Prop
    right: Prop

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class PE(Prop):
    path: Prop

    def children(self):
        return (self.path,)

    def __str__(self):
        return f"E {_wrap(self.path)}"


@dataclass(frozen=True)
class PX(Prop):
    arg: Prop

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"X {_wrap(self.arg)}"


@dataclass(frozen=True)
class PWX(Prop):
    """Weak next: holds at the last position or if the argument holds next."""

    arg: Prop

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"WX {_wrap(self.arg)}"


@dataclass(frozen=True)
class PG(Prop):
    arg: Prop

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"G {_wrap(self.arg)}"


@dataclass(frozen=True)
class PU(Prop):
    left: Prop
    right: Prop

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        if isinstance(self.left, PTrue):
            return f"F {_wrap(self.right)}"
        return f"({_wrap(self.left)} U {_wrap(self.right)})"


@dataclass(frozen=True)
class PActionNext(Prop):
    action: str
    arg: Prop

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"<{self.action}> {_wrap(self.arg)}"


def _wrap(p: Prop) -> str:
    s = str(p)
    if isinstance(p, (PTrue, PFalse, PConstraint, PState)) or s.startswith("("):
        return s
    return f"({s})"


# --------------------------------------------------------------------------
# Constructors
# --------------------------------------------------------------------------


def p_not(p: Prop) -> Prop:
    if isinstance(p, PNot):
        return p.arg
    if isinstance(p, PTrue):
        return PFalse()
    if isinstance(p, PFalse):
        return PTrue()
    if isinstance(p, PConstraint):
        return PConstraint(neg(p.formula))
    return PNot(p)


def p_and(a: Prop, b: Prop) -> Prop:
    if isinstance(a, PConstraint) and isinstance(b, PConstraint):
        return PConstraint(conj(a.formula, b.formula))
    return PAnd(a, b)


def p_or(a: Prop, b: Prop) -> Prop:
    if isinstance(a, PConstraint) and isinstance(b, PConstraint):
        return PConstraint(disj(a.formula, b.formula))
    return POr(a, b)


def p_implies(a: Prop, b: Prop) -> Prop:
    return p_or(p_not(a), b)


def p_exists(p: Prop) -> Prop:
    return PE(p)


def p_forall(p: Prop) -> Prop:
    return PNot(PE(p_not(p)))


def p_finally(p: Prop) -> Prop:
    return PU(PTrue(), p)


def p_states(names) -> Prop:
    """Disjunction of control-state atoms (``false`` for none)."""
    out: Prop | None = None
    for n in sorted(names):
        out = PState(n) if out is None else POr(out, PState(n))
    return out if out is not None else PFalse()


# --------------------------------------------------------------------------
# Queries
# --------------------------------------------------------------------------


def is_state(p: Prop) -> bool:
    """True for state formulas (no temporal operator outside an E)."""
    if isinstance(p, (PTrue, PFalse, PConstraint, PState, PE)):
        return True
    if isinstance(p, (PNot, PAnd, POr)):
        return all(is_state(c) for c in p.children())
    return False


def qd(p: Prop) -> int:
    """Maximal nesting depth of path quantifiers."""
    inner = max((qd(c) for c in p.children()), default=0)
    return inner + 1 if isinstance(p, PE) else inner


def subformulas(p: Prop) -> Iterator[Prop]:
    yield p
    for c in p.children():
        yield from subformulas(c)


def actions_used(p: Prop) -> list[str]:
    seen: dict[str, None] = {}
    for s in subformulas(p):
        if isinstance(s, PActionNext):
            seen[s.action] = None
    return list(seen)


def states_used(p: Prop) -> set[str]:
    return {s.name for s in subformulas(p) if isinstance(s, PState)}


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

KEYWORDS = frozenset({"E", "A", "X", "G", "F", "U", "state", "true", "false"})


class _PropParser(ConstraintParser):
    keywords = KEYWORDS

    def __init__(self, ts: TokenStream, model: Ddsa):
        super().__init__(ts, plain_resolver(model.variables))
        self.model = model

    def prop(self) -> Prop:
        left = self.disjunction()
        if self.ts.at("->"):
            self.ts.advance()
            return p_implies(left, self.prop())
        return left

    def disjunction(self) -> Prop:
        p = self.conjunction()
        while self.ts.at("|", "||"):
            self.ts.advance()
            p = p_or(p, self.conjunction())
        return p

    def conjunction(self) -> Prop:
        p = self.until()
        while self.ts.at("&", "&&"):
            self.ts.advance()
            p = p_and(p, self.until())
        return p

    def until(self) -> Prop:
        left = self.unary()
        if self.ts.at("U"):
            self.ts.advance()
            return PU(left, self.until())
        return left

    def unary(self) -> Prop:
        ts = self.ts
        t = ts.tok
        if ts.at("!"):
            ts.advance()
            return p_not(self.unary())
        if ts.at("E"):
            ts.advance()
            return PE(self.unary())
        if ts.at("A"):
            ts.advance()
            return p_forall(self.unary())
        if ts.at("X"):
            ts.advance()
            return PX(self.unary())
        if ts.at("G"):
            ts.advance()
            return PG(self.unary())
        if ts.at("F"):
            ts.advance()
            return p_finally(self.unary())
        if ts.at("<"):
            ts.advance()
            name = ts.tok
            if name.kind != "ID":
                ts.error("expected an action name")
            ts.advance()
            ts.expect(">")
            if name.text not in self.model.actions:
                raise ParseError(f"unknown action {name.text!r}", ts.text, name.pos, ts.where)
            return PActionNext(name.text, self.unary())
        return self.primary()

    def primary(self) -> Prop:
        ts = self.ts
        if ts.at("true"):
            ts.advance()
            return PTrue()
        if ts.at("false"):
            ts.advance()
            return PFalse()
        if ts.at("state"):
            ts.advance()
            name = ts.tok
            if name.kind != "ID":
                ts.error("expected a control state name")
            ts.advance()
            if name.text not in self.model.states:
                raise ParseError(f"unknown control state {name.text!r}", ts.text, name.pos, ts.where)
            return PState(name.text)
        if ts.at("("):
            ts.advance()
            p = self.prop()
            ts.expect(")")
            return p
        if self.starts_term():
            return PConstraint(self.atom())
        ts.error("expected a property")


def parse_property(text: str, model: Ddsa, where: str = "property") -> Prop:
    """Parse a CTL*_f state formula, checking names against ``model``."""
    ts = TokenStream(text, where)
    p = _PropParser(ts, model).prop()
    if ts.tok.kind != "EOF":
        ts.error("unexpected trailing input")
    if not is_state(p):
        raise ParseError("a property must be a state formula (put path formulas under E or A)", text, 0, where)
    return p


# --------------------------------------------------------------------------
# ⟨a⟩ encoding
# --------------------------------------------------------------------------


def indicator_name(action: str) -> str:
    return "x_" + "".join(ch for ch in action if ch.isalnum() or ch == "_")


def encode_action_next(model: Ddsa, chi: Prop) -> tuple[Ddsa, Prop]:
    """Replace ``<a>p`` by ``X(p & x_a = 1)`` over a model instrumented with ``x_a``.

    Every action ``b`` gets ``x_a' = 1`` if ``b == a`` and ``x_a' = 0``
    otherwise; ``x_a`` starts at 0. The indicator is an integer when all model
    variables are integers and a rational otherwise, so the model stays in
    the same constraint fragment.
    """
    used = actions_used(chi)
    if not used:
        return model, chi
    for a in used:
        if a not in model.actions:
            raise ModelError(f"unknown action {a!r} in property")
    all_int = bool(model.variables) and all(s.is_int for s in model.variables.values())
    sort = Sort.INT if all_int else Sort.RAT
    names: dict[str, str] = {}
    for a in used:
        n = indicator_name(a)
        if n in model.variables or n in names.values():
            raise ModelError(f"indicator variable {n!r} for action {a!r} collides with an existing name")
        names[a] = n
    variables = dict(model.variables)
    for n in names.values():
        variables[n] = sort
    actions: dict[str, Action] = {}
    for b, act in model.actions.items():
        extra = [
            eq(Var(n, sort, Tag.WRITE), 1 if b == a else 0) for a, n in names.items()
        ]
        actions[b] = Action(b, conj(act.guard, *extra))
    init = None
    if model.init is not None:
        init = dict(model.init)
        for n in names.values():
            init[n] = 0
    if init is not None:
        init = {k: Fraction(v) for k, v in init.items()}
    new_model = Ddsa(
        variables, model.states, model.initial, model.finals, actions,
        model.transitions, init, list(model.warnings),
    )

    def enc(p: Prop) -> Prop:
        if isinstance(p, PActionNext):
            flag = PConstraint(eq(Var(names[p.action], sort), 1))
            return PX(p_and(enc(p.arg), flag))
        if isinstance(p, PNot):
            return PNot(enc(p.arg))
        if isinstance(p, PAnd):
            return PAnd(enc(p.left), enc(p.right))
        if isinstance(p, POr):
            return POr(enc(p.left), enc(p.right))
        if isinstance(p, PE):
            return PE(enc(p.path))
        if isinstance(p, PX):
            return PX(enc(p.arg))
        if isinstance(p, PWX):
            return PWX(enc(p.arg))
        if isinstance(p, PG):
            return PG(enc(p.arg))
        if isinstance(p, PU):
            return PU(enc(p.left), enc(p.right))
        return p

    return new_model, enc(chi)


# --------------------------------------------------------------------------
# Negation normal form for path formulas
# --------------------------------------------------------------------------


def nnf_path(p: Prop, negate: bool = False) -> Prop:
    """Push negations down to embedded state formulas.

    Uses the finite-trace dualities ¬X p = WX ¬p, ¬WX p = X ¬p,
    ¬G p = true U ¬p and ¬(p U q) = (¬q U (¬p ∧ ¬q)) ∨ G ¬q.
    """
    if is_state(p):
        return p_not(p) if negate else p
    if isinstance(p, PNot):
        return nnf_path(p.arg, not negate)
    if isinstance(p, PAnd):
        l, r = nnf_path(p.left, negate), nnf_path(p.right, negate)
        return POr(l, r) if negate else PAnd(l, r)
    if isinstance(p, POr):
        l, r = nnf_path(p.left, negate), nnf_path(p.right, negate)
        return PAnd(l, r) if negate else POr(l, r)
    if isinstance(p, PX):
        return PWX(nnf_path(p.arg, True)) if negate else PX(nnf_path(p.arg))
    if isinstance(p, PWX):
        return PX(nnf_path(p.arg, True)) if negate else PWX(nnf_path(p.arg))
    if isinstance(p, PG):
        return PU(PTrue(), nnf_path(p.arg, True)) if negate else PG(nnf_path(p.arg))
    if isinstance(p, PU):
        if not negate:
            return PU(nnf_path(p.left), nnf_path(p.right))
        nl, nr = nnf_path(p.left, True), nnf_path(p.right, True)
        return POr(PU(nr, PAnd(nl, nr)), PG(nr))
    if isinstance(p, PActionNext):
        raise ValueError("encode <a> operators before computing the negation normal form")
    raise TypeError(f"not a property: {p!r}")
