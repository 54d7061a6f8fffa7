"""Symbolic CTL* model checking for data-aware dynamic systems with arithmetic."""

from .checker import ModelChecker, Verdict, no_deadlock, template, verdict, weak_sound
from .classify import ClassReport, classify
from .ddsa import Ddsa, ModelError, load_ddsa
from .properties import parse_property
from .smt import SolverConfig, SolverError, SolverSession

__version__ = "0.1.0"

__all__ = [
    "ClassReport",
    "Ddsa",
    "ModelChecker",
    "ModelError",
    "SolverConfig",
    "SolverError",
    "SolverSession",
    "Verdict",
    "classify",
    "load_ddsa",
    "no_deadlock",
    "parse_property",
    "template",
    "verdict",
    "weak_sound",
]
