"""Model checking of CTL*_f properties by configuration maps.

``ch_s`` maps a state formula to a configuration map, ``ch_p`` does the same
for path formulas via one product construction per control state, and
``to_ltl`` turns a path formula into LTL over maps by solving the embedded
state formulas first.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .constraints import FALSE, TRUE, Formula, Tag, canonicalize, disj_all, evaluate, rename
from .ddsa import Ddsa, ModelError
from .ltl import (
    ConfigurationMap,
    LtlK,
    LTrue,
    LWX,
    LX,
    LG,
    LU,
    build_nfa,
    l_and,
    l_map,
    l_or,
)
from .product import DEFAULT_NODE_BUDGET, ProductAutomaton, build_product, export_dot, final_formulas
from .properties import (
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
    actions_used,
    encode_action_next,
    is_state,
    nnf_path,
    p_exists,
    p_finally,
    p_forall,
    p_implies,
    p_states,
    PActionNext,
)
from .qe import QeEngine
from .smt import SolverConfig, SolverSession, SolverStats

log = logging.getLogger(__name__)


@dataclass
class CheckStats:
    products: int = 0
    product_nodes: int = 0
    product_edges: int = 0
    chp_calls: int = 0
    cache_hits: int = 0
    wall_time: float = 0.0
    solver: SolverStats = field(default_factory=SolverStats)
    per_product: list[tuple[str, str, int, int]] = field(default_factory=list)


@dataclass
class Verdict:
    satisfied: bool | None
    witness: Formula
    solution: ConfigurationMap
    initial: dict[str, Fraction] | None = None

    @property
    def map_only(self) -> bool:
        return self.satisfied is None


class ModelChecker:
    """Checker bound to one model.

    ``jobs`` > 1 builds the per-state products of a path formula in parallel,
    each worker with its own solver session. ``dot_dir`` receives one NFA and
    one product DOT file per path formula and control state.
    """

    def __init__(
        self,
        model: Ddsa,
        config: SolverConfig | None = None,
        *,
        cache: bool = True,
        force_solver_qe: bool = False,
        node_budget: int = DEFAULT_NODE_BUDGET,
        prune: bool = True,
        jobs: int = 1,
        dot_dir: str | Path | None = None,
        simplify: bool = True,
    ):
        if jobs < 1:
            raise ValueError("jobs must be positive")
        self.model = model
        self.config = config or SolverConfig()
        self.cache = cache
        self.force_solver_qe = force_solver_qe
        self.node_budget = node_budget
        self.prune = prune
        self.jobs = jobs
        self.dot_dir = Path(dot_dir) if dot_dir is not None else None
        self.simplify = simplify
        self.session = SolverSession(self.config, cache=cache)
        self.qe = QeEngine(self.session, force_solver=force_solver_qe)
        self.stats = CheckStats()
        self._s_cache: dict[Prop, ConfigurationMap] = {}
        self._p_cache: dict[Prop, ConfigurationMap] = {}
        self._workers: list[tuple[SolverSession, QeEngine]] = []
        self._local = threading.local()
        self._lock = threading.Lock()

    # resources --------------------------------------------------------
    def close(self) -> None:
        self.session.close()
        for s, _ in self._workers:
            s.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _worker(self) -> tuple[SolverSession, QeEngine]:
        w = getattr(self._local, "pair", None)
        if w is None:
            s = SolverSession(self.config, cache=self.cache)
            w = (s, QeEngine(s, force_solver=self.force_solver_qe))
            self._local.pair = w
            with self._lock:
                self._workers.append(w)
        return w

    def solver_stats(self) -> SolverStats:
        total = SolverStats()
        total.merge(self.session.stats)
        for s, _ in self._workers:
            total.merge(s.stats)
        return total

    # map constructors --------------------------------------------------
    @property
    def states(self) -> tuple[str, ...]:
        return self.model.states

    def k_top(self) -> ConfigurationMap:
        return ConfigurationMap.top(self.states)

    def k_state(self, b: str) -> ConfigurationMap:
        return ConfigurationMap.of_state(self.states, b)

    def k_constraint(self, c: Formula) -> ConfigurationMap:
        return ConfigurationMap.of_constraint(self.states, c)

    # procedures --------------------------------------------------------
    def ch_s(self, chi: Prop) -> ConfigurationMap:
        """Configuration map of the configurations satisfying state formula ``chi``."""
        if self.cache and chi in self._s_cache:
            self.stats.cache_hits += 1
            return self._s_cache[chi]
        if isinstance(chi, PTrue):
            k = self.k_top()
        elif isinstance(chi, PFalse):
            k = ConfigurationMap.bottom(self.states)
        elif isinstance(chi, PState):
            k = self.k_state(chi.name)
        elif isinstance(chi, PConstraint):
            k = self.k_constraint(chi.formula)
        elif isinstance(chi, PNot):
            k = self.ch_s(chi.arg).complement()
        elif isinstance(chi, PAnd):
            k = self.ch_s(chi.left).conj(self.ch_s(chi.right))
        elif isinstance(chi, POr):
            k = self.ch_s(chi.left).disj(self.ch_s(chi.right))
        elif isinstance(chi, PE):
            k = self.ch_p(chi.path)
        elif isinstance(chi, PActionNext):
            raise ValueError("encode <a> operators before checking")
        else:
            raise TypeError(f"not a state formula: {chi}")
        if self.cache:
            self._s_cache[chi] = k
        return k

    def to_ltl(self, psi: Prop) -> LtlK:
        """LTL over maps for a path formula in negation normal form."""
        if is_state(psi):
            return l_map(self.ch_s(psi))
        if isinstance(psi, PAnd):
            return l_and(self.to_ltl(psi.left), self.to_ltl(psi.right))
        if isinstance(psi, POr):
            return l_or(self.to_ltl(psi.left), self.to_ltl(psi.right))
        if isinstance(psi, PX):
            return LX(self.to_ltl(psi.arg))
        if isinstance(psi, PWX):
            return LWX(self.to_ltl(psi.arg))
        if isinstance(psi, PG):
            return LG(self.to_ltl(psi.arg))
        if isinstance(psi, PU):
            return LU(self.to_ltl(psi.left), self.to_ltl(psi.right))
        if isinstance(psi, PNot):
            raise ValueError("path formula is not in negation normal form")
        raise TypeError(f"not a path formula: {psi}")

    def ch_p(self, psi: Prop) -> ConfigurationMap:
        """Map of the configurations with a final run satisfying ``psi``."""
        if self.cache and psi in self._p_cache:
            self.stats.cache_hits += 1
            return self._p_cache[psi]
        self.stats.chp_calls += 1
        call = self.stats.chp_calls
        ltl = self.to_ltl(nnf_path(psi))
        nfa = build_nfa(ltl)
        if self.dot_dir is not None:
            self.dot_dir.mkdir(parents=True, exist_ok=True)
            (self.dot_dir / f"chp{call:03d}_nfa.dot").write_text(nfa.to_dot(f"nfa{call}"), encoding="utf-8")

        def solve(b: str) -> tuple[str, Formula, ProductAutomaton]:
            session, qe = (self.session, self.qe) if self.jobs == 1 else self._worker()
            prod = build_product(self.model, nfa, b, qe, session, self.node_budget, self.prune)
            return b, self._project(final_formulas(prod), qe, session), prod

        if self.jobs == 1:
            results = [solve(b) for b in self.states]
        else:
            with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                results = list(pool.map(solve, self.states))
        entries = []
        for b, f, prod in results:
            entries.append((b, f))
            self.stats.products += 1
            self.stats.product_nodes += prod.stats.nodes
            self.stats.product_edges += prod.stats.edges
            self.stats.per_product.append((str(psi), b, prod.stats.nodes, prod.stats.edges))
            if self.dot_dir is not None:
                name = f"chp{call:03d}_{_safe(b)}"
                (self.dot_dir / f"{name}.dot").write_text(export_dot(prod, name), encoding="utf-8")
        k = ConfigurationMap(entries)
        log.debug("chP(%s) = %s", psi, k.sort_key())
        if self.cache:
            self._p_cache[psi] = k
        return k

    def _project(self, finals: list[Formula], qe: QeEngine, session: SolverSession) -> Formula:
        """``⋁ ∃U. φ(V, U)``: start values become the free variables, end values are projected."""
        d = self.model
        parts = []
        for phi in finals:
            u = d.fresh(1)
            mapping = {d.var(n): u[n] for n in d.variables}
            mapping.update({d.var(n, Tag.INITIAL): d.var(n) for n in d.variables})
            parts.append(qe.eliminate(list(u.values()), rename(phi, mapping)))
        f = canonicalize(disj_all(parts))
        if self.simplify and f not in (TRUE, FALSE):
            if not session.is_sat(f):
                return FALSE
            if session.is_valid(f):
                return TRUE
        return f

    def product_for(self, psi: Prop, b: str) -> ProductAutomaton:
        """The product that ``ch_p`` builds for ``psi`` at control state ``b``."""
        nfa = build_nfa(self.to_ltl(nnf_path(psi)))
        return build_product(self.model, nfa, b, self.qe, self.session, self.node_budget, self.prune)

    def solve(self, chi: Prop) -> ConfigurationMap:
        t0 = time.perf_counter()
        try:
            return self.ch_s(chi)
        finally:
            self.stats.wall_time += time.perf_counter() - t0
            self.stats.solver = self.solver_stats()


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_-" else "_" for ch in name)


# --------------------------------------------------------------------------
# Verdicts
# --------------------------------------------------------------------------


def verdict(model: Ddsa, chi: Prop, checker: ModelChecker | None = None, **kwargs) -> Verdict:
    """Solve ``chi`` and evaluate the solution at the initial configuration.

    ``<a>`` operators are encoded first. Without an initial assignment the
    verdict carries only the solution map.
    """
    if actions_used(chi):
        model, chi = encode_action_next(model, chi)
        if checker is not None and checker.model is not model:
            raise ModelError("properties with <a> need a checker built for the encoded model")
    own = checker is None
    if own:
        checker = ModelChecker(model, **kwargs)
    try:
        k = checker.solve(chi)
    finally:
        if own:
            checker.close()
    witness = k[model.initial]
    if not model.has_init:
        return Verdict(None, witness, k)
    ok = evaluate(witness, model.init_assignment())
    return Verdict(ok, witness, k, dict(model.init))


def prepare(model: Ddsa, chi: Prop) -> tuple[Ddsa, Prop]:
    """Model and property with ``<a>`` operators encoded away."""
    if actions_used(chi):
        return encode_action_next(model, chi)
    return model, chi


# --------------------------------------------------------------------------
# Property templates
# --------------------------------------------------------------------------


def no_deadlock(model: Ddsa) -> Prop:
    """``A G E F`` of the disjunction of the final states."""
    return p_forall(PG(p_exists(p_finally(p_states(model.finals)))))


def weak_sound(model: Ddsa, action: str) -> Prop:
    """``E F <a>true -> A G (<a>true -> F final)``."""
    if action not in model.actions:
        raise ModelError(f"unknown action {action!r} in template")
    fire = PActionNext(action, PTrue())
    final = p_states(model.finals)
    return p_implies(p_exists(p_finally(fire)), p_forall(PG(p_implies(fire, p_finally(final)))))


def template(model: Ddsa, spec: str) -> Prop:
    """``no_deadlock`` or ``weak_sound:ACTION``."""
    name, _, arg = spec.partition(":")
    if name == "no_deadlock" and not arg:
        return no_deadlock(model)
    if name == "weak_sound" and arg:
        return weak_sound(model, arg)
    raise ValueError(f"unknown template {spec!r}; expected no_deadlock or weak_sound:ACTION")
