"""Syntactic membership in the MC and IPC system classes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .constraints import (
    And,
    Atom,
    Formula,
    atom_is_ipc,
    atom_is_mc,
    atoms,
    constants_of,
    moduli_of,
)
from .ddsa import Ddsa
from .properties import PConstraint, Prop, subformulas


@dataclass
class ClassReport:
    is_mc_system: bool
    is_ipc_system: bool
    mc_offending: list[tuple[str, str]] = field(default_factory=list)
    ipc_offending: list[tuple[str, str]] = field(default_factory=list)
    constants: set[Fraction] = field(default_factory=set)
    modulus_lcm: int | None = None

    @property
    def label(self) -> str:
        if self.is_mc_system:
            return "MC"
        if self.is_ipc_system:
            return "IPC"
        return "none"

    @property
    def guaranteed(self) -> bool:
        return self.is_mc_system or self.is_ipc_system

    def lines(self) -> list[str]:
        out = [f"class: {self.label}"]
        consts = ", ".join(_fmt(c) for c in sorted(self.constants))
        out.append(f"constants: {{{consts}}}")
        if self.is_ipc_system and self.modulus_lcm is not None:
            out.append(f"modulus lcm: {self.modulus_lcm}")
        if not self.guaranteed:
            out.append("warning: neither MC nor IPC; termination is not guaranteed")
            for where, why in self.mc_offending:
                out.append(f"  not MC: {where}: {why}")
            for where, why in self.ipc_offending:
                out.append(f"  not IPC: {where}: {why}")
        return out


def _fmt(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _is_conjunction(f: Formula) -> bool:
    if isinstance(f, Atom):
        return True
    if isinstance(f, And):
        return all(isinstance(a, Atom) for a in f.args)
    return f.sort_key in ("true", "false")


def classify(d: Ddsa, chi: Prop | None = None) -> ClassReport:
    """MC needs every guard and property atom to be an MC. IPC needs every
    guard to be a conjunction of IPC atoms and every property atom to be an
    IPC. Initial values contribute to the constant set."""
    items: list[tuple[str, Formula, bool]] = []
    for a in d.actions.values():
        items.append((f"guard of {a.name}", a.guard, True))
    if chi is not None:
        for s in subformulas(chi):
            if isinstance(s, PConstraint):
                items.append((f"property constraint {s.formula}", s.formula, False))

    mc_bad: list[tuple[str, str]] = []
    ipc_bad: list[tuple[str, str]] = []
    consts: set[Fraction] = set()
    moduli: set[int] = set()
    for where, f, is_guard in items:
        for a in atoms(f):
            if not atom_is_mc(a):
                mc_bad.append((where, f"atom {a}"))
            if not atom_is_ipc(a):
                ipc_bad.append((where, f"atom {a}"))
        if is_guard and not _is_conjunction(f):
            ipc_bad.append((where, "IPC atoms, non-conjunctive"))
        consts |= constants_of(f)
        moduli |= moduli_of(f)
    if d.init is not None:
        consts |= set(d.init.values())
    lcm = math.lcm(*moduli) if moduli else None
    return ClassReport(not mc_bad, not ipc_bad, mc_bad, ipc_bad, consts, lcm)
