"""LTL over configuration maps and its translation to an NFA.

Maps are the atoms. The NFA is built with the usual δ-function that tags
successor tuples with ``last``/``¬last``; tags never reach the final
automaton: tuples carrying both are dropped, untagged-by-``last`` tuples become
ordinary edges, and ``last``-tagged tuples into ``⊤`` are redirected to the
extra final state ``q_e``.
"""

from __future__ import annotations

import functools
import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .constraints import FALSE, TRUE, Formula, canonicalize, conj_all, neg

# --------------------------------------------------------------------------
# Configuration maps
# --------------------------------------------------------------------------

_intern_lock = threading.Lock()
_interned: dict[tuple, "ConfigurationMap"] = {}
_ids = itertools.count()


class ConfigurationMap:
    """Total map from control states to canonical formulas, hash-consed."""

    __slots__ = ("entries", "ident", "__weakref__")

    def __new__(cls, entries: Mapping[str, Formula] | Iterable[tuple[str, Formula]]):
        items = entries.items() if isinstance(entries, Mapping) else entries
        key = tuple(sorted((b, canonicalize(f)) for b, f in items))
        with _intern_lock:
            obj = _interned.get(key)
            if obj is None:
                obj = super().__new__(cls)
                obj.entries = key
                obj.ident = next(_ids)
                _interned[key] = obj
        return obj

    def __getitem__(self, b: str) -> Formula:
        for s, f in self.entries:
            if s == b:
                return f
        raise KeyError(b)

    def __iter__(self):
        return (b for b, _ in self.entries)

    def items(self):
        return iter(self.entries)

    @property
    def states(self) -> tuple[str, ...]:
        return tuple(b for b, _ in self.entries)

    def complement(self) -> "ConfigurationMap":
        return ConfigurationMap((b, neg(f)) for b, f in self.entries)

    def __invert__(self):
        return self.complement()

    def conj(self, other: "ConfigurationMap") -> "ConfigurationMap":
        if self.states != other.states:
            raise ValueError("maps over different control states")
        return ConfigurationMap((b, conj_all([f, other[b]])) for b, f in self.entries)

    __and__ = conj

    def disj(self, other: "ConfigurationMap") -> "ConfigurationMap":
        return (~self).conj(~other).complement()

    __or__ = disj

    @property
    def is_true(self) -> bool:
        return all(f == TRUE for _, f in self.entries)

    @property
    def is_false(self) -> bool:
        return all(f == FALSE for _, f in self.entries)

    def sort_key(self) -> str:
        return "{" + ", ".join(f"{b}: {f}" for b, f in self.entries) + "}"

    def __repr__(self):
        return f"K{self.ident}"

    def describe(self) -> str:
        return f"K{self.ident} = {self.sort_key()}"

    # base cases
    @classmethod
    def top(cls, states: Iterable[str]) -> "ConfigurationMap":
        return cls((b, TRUE) for b in states)

    @classmethod
    def bottom(cls, states: Iterable[str]) -> "ConfigurationMap":
        return cls((b, FALSE) for b in states)

    @classmethod
    def of_state(cls, states: Iterable[str], target: str) -> "ConfigurationMap":
        return cls((b, TRUE if b == target else FALSE) for b in states)

    @classmethod
    def of_constraint(cls, states: Iterable[str], c: Formula) -> "ConfigurationMap":
        return cls((b, c) for b in states)


# --------------------------------------------------------------------------
# LTL over maps
# --------------------------------------------------------------------------


class LtlK:
    __slots__ = ()

    def children(self) -> tuple["LtlK", ...]:
        return ()


@dataclass(frozen=True)
class LTrue(LtlK):
    def __str__(self):
        return "⊤"


@dataclass(frozen=True)
class LFalse(LtlK):
    def __str__(self):
        return "⊥"


@dataclass(frozen=True)
class LMap(LtlK):
    k: ConfigurationMap

    def __str__(self):
        return repr(self.k)


@dataclass(frozen=True)
class LNot(LtlK):
    arg: LtlK

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"¬{_paren(self.arg)}"


@dataclass(frozen=True)
class LAnd(LtlK):
    args: tuple[LtlK, ...]

    def children(self):
        return self.args

    def __str__(self):
        return "(" + " ∧ ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class LOr(LtlK):
    args: tuple[LtlK, ...]

    def children(self):
        return self.args

    def __str__(self):
        return "(" + " ∨ ".join(str(a) for a in self.args) + ")"


@dataclass(frozen=True)
class LX(LtlK):
    arg: LtlK

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"X{_paren(self.arg)}"


@dataclass(frozen=True)
class LWX(LtlK):
    arg: LtlK

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"WX{_paren(self.arg)}"


@dataclass(frozen=True)
class LG(LtlK):
    arg: LtlK

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"G{_paren(self.arg)}"


@dataclass(frozen=True)
class LU(LtlK):
    left: LtlK
    right: LtlK

    def children(self):
        return (self.left, self.right)

    def __str__(self):
        if isinstance(self.left, LTrue):
            return f"F{_paren(self.right)}"
        return f"({self.left} U {self.right})"


def _paren(p: LtlK) -> str:
    s = str(p)
    return s if isinstance(p, (LTrue, LFalse, LMap)) or s.startswith("(") else f"({s})"


@functools.lru_cache(maxsize=1 << 16)
def _key(p: LtlK) -> str:
    return str(p)


def l_map(k: ConfigurationMap) -> LtlK:
    if k.is_true:
        return LTrue()
    if k.is_false:
        return LFalse()
    return LMap(k)


def l_and(*args: LtlK) -> LtlK:
    items: dict[LtlK, None] = {}
    for a in args:
        for b in a.args if isinstance(a, LAnd) else (a,):
            if isinstance(b, LFalse):
                return LFalse()
            if not isinstance(b, LTrue):
                items[b] = None
    if not items:
        return LTrue()
    if len(items) == 1:
        return next(iter(items))
    return LAnd(tuple(sorted(items, key=_key)))


def l_or(*args: LtlK) -> LtlK:
    items: dict[LtlK, None] = {}
    for a in args:
        for b in a.args if isinstance(a, LOr) else (a,):
            if isinstance(b, LTrue):
                return LTrue()
            if not isinstance(b, LFalse):
                items[b] = None
    if not items:
        return LFalse()
    if len(items) == 1:
        return next(iter(items))
    return LOr(tuple(sorted(items, key=_key)))


def l_finally(p: LtlK) -> LtlK:
    return LU(LTrue(), p)


def ltl_nnf(p: LtlK, negate: bool = False) -> LtlK:
    """Negation normal form; negated maps become complement maps."""
    if isinstance(p, LTrue):
        return LFalse() if negate else p
    if isinstance(p, LFalse):
        return LTrue() if negate else p
    if isinstance(p, LMap):
        return l_map(p.k.complement()) if negate else p
    if isinstance(p, LNot):
        return ltl_nnf(p.arg, not negate)
    if isinstance(p, LAnd):
        parts = [ltl_nnf(a, negate) for a in p.args]
        return l_or(*parts) if negate else l_and(*parts)
    if isinstance(p, LOr):
        parts = [ltl_nnf(a, negate) for a in p.args]
        return l_and(*parts) if negate else l_or(*parts)
    if isinstance(p, LX):
        return LWX(ltl_nnf(p.arg, True)) if negate else LX(ltl_nnf(p.arg))
    if isinstance(p, LWX):
        return LX(ltl_nnf(p.arg, True)) if negate else LWX(ltl_nnf(p.arg))
    if isinstance(p, LG):
        return l_finally(ltl_nnf(p.arg, True)) if negate else LG(ltl_nnf(p.arg))
    if isinstance(p, LU):
        if not negate:
            return LU(ltl_nnf(p.left), ltl_nnf(p.right))
        nl, nr = ltl_nnf(p.left, True), ltl_nnf(p.right, True)
        return l_or(LU(nr, l_and(nl, nr)), LG(nr))
    raise TypeError(f"not an LTL formula: {p!r}")


def is_nnf(p: LtlK) -> bool:
    if isinstance(p, LNot):
        return False
    return all(is_nnf(c) for c in p.children())


def maps_of(p: LtlK) -> set[ConfigurationMap]:
    if isinstance(p, LMap):
        return {p.k}
    out: set[ConfigurationMap] = set()
    for c in p.children():
        out |= maps_of(c)
    return out


# --------------------------------------------------------------------------
# δ-function
# --------------------------------------------------------------------------


class _Tag:
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self):
        return self.name


LAST = _Tag("last")
NOT_LAST = _Tag("¬last")

Tuples = frozenset  # of (LtlK, frozenset of maps and tags)


@functools.lru_cache(maxsize=1 << 16)
def boolean_normal_form(q: LtlK) -> LtlK:
    """DNF over the non-boolean subformulas, with subsumed clauses removed.

    Successor states are positive boolean combinations of subformulas of the
    input, so this form keeps the state space finite.
    """

    def clauses(p: LtlK) -> set[frozenset]:
        if isinstance(p, LTrue):
            return {frozenset()}
        if isinstance(p, LFalse):
            return set()
        if isinstance(p, LOr):
            return set().union(*(clauses(a) for a in p.args))
        if isinstance(p, LAnd):
            acc = {frozenset()}
            for a in p.args:
                acc = {c | d for c in acc for d in clauses(a)}
            return acc
        return {frozenset({p})}

    cs = clauses(q)
    minimal = [c for c in cs if not any(d < c for d in cs)]
    return l_or(*(l_and(*c) for c in minimal))


def _combine(r1, r2, op) -> frozenset:
    out = set()
    for q1, s1 in r1:
        for q2, s2 in r2:
            s = s1 | s2
            if LAST in s and NOT_LAST in s:
                # can never become consistent again, drop early
                continue
            out.add((boolean_normal_form(op(q1, q2)), s))
    return frozenset(out)


_E = frozenset()
_DELTA_LAMBDA = frozenset({(LTrue(), frozenset({LAST})), (LFalse(), frozenset({NOT_LAST}))})


@functools.lru_cache(maxsize=1 << 16)
def delta(q: LtlK) -> frozenset:
    """Successor tuples ``(formula, letter-with-tags)`` of an NNF formula."""
    if isinstance(q, LTrue):
        return frozenset({(LTrue(), _E)})
    if isinstance(q, LFalse):
        return frozenset({(LFalse(), _E)})
    if isinstance(q, LMap):
        return frozenset({(LTrue(), frozenset({q.k})), (LFalse(), _E)})
    if isinstance(q, LOr):
        acc = delta(q.args[0])
        for a in q.args[1:]:
            acc = _combine(acc, delta(a), l_or)
        return acc
    if isinstance(q, LAnd):
        acc = delta(q.args[0])
        for a in q.args[1:]:
            acc = _combine(acc, delta(a), l_and)
        return acc
    if isinstance(q, LX):
        return frozenset({(q.arg, frozenset({NOT_LAST})), (LFalse(), frozenset({LAST}))})
    if isinstance(q, LWX):
        return frozenset({(q.arg, frozenset({NOT_LAST})), (LTrue(), frozenset({LAST}))})
    if isinstance(q, LG):
        step = _combine(delta(LX(q)), _DELTA_LAMBDA, l_or)
        return _combine(delta(q.arg), step, l_and)
    if isinstance(q, LU):
        step = _combine(delta(q.left), delta(LX(q)), l_and)
        return _combine(delta(q.right), step, l_or)
    if isinstance(q, LNot):
        raise ValueError("delta expects a formula in negation normal form")
    raise TypeError(f"not an LTL formula: {q!r}")


# --------------------------------------------------------------------------
# NFA
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class QEnd:
    """The extra final state reached on a ``last``-tagged step into ⊤."""

    def __str__(self):
        return "q_e"


Q_END = QEnd()


@dataclass(frozen=True)
class QNext:
    """Non-final state for a ``¬last``-tagged step into ⊤: one more letter must follow.

    Used only when no ``last``-tagged step into ⊤ covers the same letter;
    sending the step straight to the final ⊤ would then accept words that
    end where a next position is still required (one-letter words for ``X ⊤``).
    """

    def __str__(self):
        return "q_n"


Q_NEXT = QNext()

Letter = frozenset  # of ConfigurationMap


@dataclass
class Nfa:
    initial: LtlK
    states: list = field(default_factory=list)
    edges: list = field(default_factory=list)  # (q, letter, q')

    def __post_init__(self):
        self._out: dict = {}

    @property
    def finals(self) -> frozenset:
        return frozenset({LTrue(), Q_END})

    def is_final(self, q) -> bool:
        return q == LTrue() or q == Q_END

    def is_sink(self, q) -> bool:
        return q == LFalse()

    def outgoing(self, q) -> list[tuple[Letter, object]]:
        if not self._out:
            for src, w, dst in self.edges:
                self._out.setdefault(src, []).append((w, dst))
        return self._out.get(q, [])

    def state_index(self, q) -> int:
        return self.states.index(q)

    def accepts(self, word: Sequence[Iterable[ConfigurationMap]]) -> bool:
        """Acceptance of a word whose letters are sets of maps (exact matching)."""
        current = {self.initial}
        for letter in word:
            letter = frozenset(letter)
            current = {dst for q in current for w, dst in self.outgoing(q) if w == letter}
            if not current:
                return False
        return any(self.is_final(q) for q in current) and len(word) > 0

    def accepts_consistent(self, holds: Sequence[Mapping[ConfigurationMap, bool]] | Sequence) -> bool:
        """Is some word consistent with the given positions accepted?

        ``holds[i](K)`` tells whether map ``K`` is satisfied at position ``i``;
        an edge can be taken at position ``i`` iff all maps of its letter hold.
        """
        current = {self.initial}
        for pos in holds:
            check = pos if callable(pos) else pos.__getitem__
            current = {
                dst for q in current for w, dst in self.outgoing(q) if all(check(k) for k in w)
            }
            if not current:
                return False
        return bool(holds) and any(self.is_final(q) for q in current)

    def to_dot(self, name: str = "nfa") -> str:
        idx = {q: i for i, q in enumerate(self.states)}
        lines = [f"digraph {name} {{", "  rankdir=LR;", '  node [shape=circle, fontname="monospace"];']
        lines.append('  init [shape=point, label=""];')
        for q, i in idx.items():
            shape = "doublecircle" if self.is_final(q) else "circle"
            label = _dot_escape(str(q))
            lines.append(f'  q{i} [label="{label}", shape={shape}];')
        lines.append(f"  init -> q{idx[self.initial]};")
        for src, w, dst in self.edges:
            label = _dot_escape(_letter_str(w))
            lines.append(f'  q{idx[src]} -> q{idx[dst]} [label="{label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def _letter_str(w) -> str:
    return "{" + ", ".join(sorted(repr(k) for k in w)) + "}" if w else "∅"


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def build_nfa(psi: LtlK) -> Nfa:
    """Worklist construction of the automaton for an NNF formula."""
    if not is_nnf(psi):
        psi = ltl_nnf(psi)
    nfa = Nfa(psi)
    seen: dict = {}

    def add(q):
        if q not in seen:
            seen[q] = len(nfa.states)
            nfa.states.append(q)
            work.append(q)

    work: list = []
    add(psi)
    edges: dict = {}
    while work:
        q = work.pop(0)
        tuples = sorted(delta(q), key=lambda t: (_key(t[0]), _letter_key(t[1])))
        # letters that may end the word in ⊤ right here
        ending = [
            frozenset(x for x in tagged if isinstance(x, ConfigurationMap))
            for succ, tagged in tuples
            if succ == LTrue() and LAST in tagged and NOT_LAST not in tagged
        ]
        for succ, tagged in tuples:
            if LAST in tagged and NOT_LAST in tagged:
                continue
            letter = frozenset(x for x in tagged if isinstance(x, ConfigurationMap))
            if LAST not in tagged:
                if NOT_LAST in tagged and succ == LTrue() and not any(e <= letter for e in ending):
                    if Q_NEXT not in seen:
                        seen[Q_NEXT] = len(nfa.states)
                        nfa.states.append(Q_NEXT)
                        add(LTrue())
                        edges[(Q_NEXT, frozenset(), LTrue())] = None
                    edges[(q, letter, Q_NEXT)] = None
                    continue
                add(succ)
                edges[(q, letter, succ)] = None
            elif succ == LTrue():
                if Q_END not in seen:
                    seen[Q_END] = len(nfa.states)
                    nfa.states.append(Q_END)
                edges[(q, letter, Q_END)] = None
    nfa.edges = list(edges)
    return nfa


def _letter_key(s) -> str:
    return ",".join(sorted(repr(x) for x in s))


# --------------------------------------------------------------------------
# Direct semantics
# --------------------------------------------------------------------------


def eval_ltlk_positions(psi: LtlK, holds: Sequence, i: int = 0) -> bool:
    """Evaluate ``psi`` at position ``i`` given per-position map truth.

    ``holds[j](K)`` is the truth of ``K`` at position ``j``; the run has
    ``len(holds)`` configurations.
    """
    n = len(holds) - 1
    memo: dict = {}

    def ev(p: LtlK, j: int) -> bool:
        key = (p, j)
        if key in memo:
            return memo[key]
        if isinstance(p, LTrue):
            r = True
        elif isinstance(p, LFalse):
            r = False
        elif isinstance(p, LMap):
            pos = holds[j]
            r = bool(pos(p.k) if callable(pos) else pos[p.k])
        elif isinstance(p, LNot):
            r = not ev(p.arg, j)
        elif isinstance(p, LAnd):
            r = all(ev(a, j) for a in p.args)
        elif isinstance(p, LOr):
            r = any(ev(a, j) for a in p.args)
        elif isinstance(p, LX):
            r = j < n and ev(p.arg, j + 1)
        elif isinstance(p, LWX):
            r = j == n or ev(p.arg, j + 1)
        elif isinstance(p, LG):
            r = ev(p.arg, j) and (j == n or ev(p, j + 1))
        elif isinstance(p, LU):
            r = ev(p.right, j) or (j < n and ev(p.left, j) and ev(p, j + 1))
        else:
            raise TypeError(f"not an LTL formula: {p!r}")
        memo[key] = r
        return r

    return ev(psi, i)
