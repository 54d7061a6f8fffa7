"""Cross product of a DDSA with an NFA over configuration maps.

Nodes are triples ``(b, q, φ)`` where ``φ`` is a history constraint over the
current variables and the initial-value copies. The construction starts in a
dummy control state and takes one step with a guard-free action into ``b``,
so the first NFA letter is read at the start configuration.
"""

from __future__ import annotations

import logging
import time
from collections import deque
from dataclasses import dataclass, field

from .constraints import FALSE, Formula, canonicalize, conj_all
from .ddsa import Ddsa
from .ltl import LFalse, Nfa, Q_END, _dot_escape, _letter_str
from .smt import SolverSession

log = logging.getLogger(__name__)

DUMMY_STATE = "⊥init"
DUMMY_ACTION = "a0"
DEFAULT_NODE_BUDGET = 50_000


class BudgetExceeded(RuntimeError):
    def __init__(self, budget: int, where: str = ""):
        self.budget = budget
        msg = f"product exceeded {budget} nodes; possibly outside a decidable fragment"
        super().__init__(f"{msg} ({where})" if where else msg)


@dataclass(frozen=True)
class ProductNode:
    ident: int
    control: str
    nfa_state: object
    formula: Formula
    is_final: bool
    is_sink: bool = False


@dataclass
class ProductStats:
    nodes: int = 0
    edges: int = 0
    sat_checks: int = 0
    equiv_checks: int = 0
    wall_time: float = 0.0


@dataclass
class ProductAutomaton:
    control: str
    nodes: list[ProductNode] = field(default_factory=list)
    edges: list[tuple[int, str, frozenset, int]] = field(default_factory=list)
    stats: ProductStats = field(default_factory=ProductStats)

    @property
    def initial(self) -> ProductNode:
        return self.nodes[0]

    @property
    def finals(self) -> list[ProductNode]:
        return [n for n in self.nodes if n.is_final]


def letter_formula(letter, b: str) -> Formula:
    """``w(b)``: the conjunction of ``K(b)`` over the maps of the letter."""
    return canonicalize(conj_all(k[b] for k in sorted(letter, key=lambda k: k.ident)))


def build_product(
    d: Ddsa,
    nfa: Nfa,
    b: str,
    qe,
    session: SolverSession,
    node_budget: int = DEFAULT_NODE_BUDGET,
    prune: bool = False,
) -> ProductAutomaton:
    """Breadth-first product construction from ``b``.

    A successor formula is ``update(φ, a) ∧ w(b')``; unsatisfiable successors
    are dropped and a successor equivalent to an existing node with the same
    control and NFA state is merged into it. Successors into the NFA sink
    ``⊥`` are kept as unexpanded leaves unless ``prune`` is set.
    """
    if b not in d.states:
        raise ValueError(f"unknown control state {b!r}")
    t0 = time.perf_counter()
    prod = ProductAutomaton(control=b)
    stats = prod.stats
    buckets: dict[tuple, list[int]] = {}
    sink = LFalse()

    def node_for(ctrl: str, q, psi: Formula) -> tuple[int, bool]:
        bucket = buckets.setdefault((ctrl, q), [])
        for i in bucket:
            if prod.nodes[i].formula == psi:
                return i, False
        for i in bucket:
            stats.equiv_checks += 1
            if session.check_equiv(prod.nodes[i].formula, psi):
                return i, False
        if len(prod.nodes) >= node_budget:
            raise BudgetExceeded(node_budget, f"product for {b}")
        final = ctrl in d.finals and nfa.is_final(q)
        n = ProductNode(len(prod.nodes), ctrl, q, psi, final, q == sink)
        prod.nodes.append(n)
        bucket.append(n.ident)
        return n.ident, True

    start, _ = node_for(DUMMY_STATE, nfa.initial, d.phi_nu())
    frontier: deque[int] = deque()
    seen_edges: set[tuple] = set()

    def expand(src: int, steps):
        node = prod.nodes[src]
        for action, b2, phi_a in steps:
            for letter, q2 in nfa.outgoing(node.nfa_state):
                if prune and q2 == sink:
                    continue
                psi = canonicalize(conj_all([phi_a, letter_formula(letter, b2)]))
                if psi == FALSE:
                    continue
                stats.sat_checks += 1
                if not session.is_sat(psi):
                    continue
                dst, new = node_for(b2, q2, psi)
                edge = (src, action, letter, dst)
                if edge not in seen_edges:
                    seen_edges.add(edge)
                    prod.edges.append(edge)
                if new and q2 != sink and q2 != Q_END:
                    frontier.append(dst)

    # the dummy step does not change any variable
    expand(start, [(DUMMY_ACTION, b, prod.nodes[start].formula)])
    while frontier:
        src = frontier.popleft()
        node = prod.nodes[src]
        if not nfa.outgoing(node.nfa_state):
            continue
        steps = [
            (a, b2, d.update(node.formula, a, qe)) for _, a, b2 in d.outgoing(node.control)
        ]
        expand(src, steps)
    stats.nodes = len(prod.nodes)
    stats.edges = len(prod.edges)
    stats.wall_time = time.perf_counter() - t0
    log.debug("product for %s: %d nodes, %d edges", b, stats.nodes, stats.edges)
    return prod


def final_formulas(p: ProductAutomaton) -> list[Formula]:
    out: dict[Formula, None] = {}
    for n in p.finals:
        out[canonicalize(n.formula)] = None
    return list(out)


def export_dot(p: ProductAutomaton, name: str = "product") -> str:
    lines = [f"digraph {name} {{", '  node [shape=box, fontname="monospace"];']
    for n in p.nodes:
        label = _dot_escape(f"{n.control} | {n.nfa_state} | {n.formula}")
        style = []
        if n.is_final:
            style.append("filled")
        if n.is_sink:
            style.append("dashed")
        attrs = f'label="{label}"'
        if style:
            attrs += f', style="{",".join(style)}"'
        if n.is_final:
            attrs += ", fillcolor=lightgrey"
        lines.append(f"  n{n.ident} [{attrs}];")
    for src, action, letter, dst in p.edges:
        label = _dot_escape(f"{action} / {_letter_str(letter)}")
        lines.append(f'  n{src} -> n{dst} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
