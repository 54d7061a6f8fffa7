"""Command-line front end.

Exit codes: 0 property holds at the initial configuration, 1 it does not,
2 the model has no initial assignment (only the solution map is printed),
10 and above are errors.
"""

from __future__ import annotations

import argparse
import logging
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

from .checker import ModelChecker, prepare, template
from .classify import classify
from .constraints import evaluate
from .ddsa import ModelError, load_ddsa
from .grammar import ParseError
from .product import BudgetExceeded
from .properties import parse_property
from .smt import SolverConfig, SolverError, SolverKind, to_smtlib_script

EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_MAP_ONLY = 2
EXIT_USAGE = 10
EXIT_MODEL = 11
EXIT_PROPERTY = 12
EXIT_SOLVER = 13
EXIT_BUDGET = 14
EXIT_IO = 15


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ddsacheck", description="CTL* model checking for data-aware dynamic systems.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    c = sub.add_parser("check", help="check a property against a model")
    c.add_argument("--model", required=True, metavar="PATH", help="model in JSON format")
    g = c.add_mutually_exclusive_group(required=True)
    g.add_argument("--property", metavar="STR")
    g.add_argument("--property-file", metavar="PATH")
    g.add_argument("--template", metavar="NAME", help="no_deadlock or weak_sound:ACTION")
    c.add_argument("--init", action="append", default=[], metavar="VAR=VALUE",
                   help="override the initial assignment (repeatable; all variables needed if the model has none)")
    c.add_argument("--solver", default="z3", choices=[k.value for k in SolverKind])
    c.add_argument("--solver-path", metavar="PATH")
    c.add_argument("--timeout", type=int, default=30_000, metavar="MS", help="per-query solver timeout")
    c.add_argument("--dot", metavar="DIR", help="write NFA and product graphs as DOT files")
    c.add_argument("--keep-sinks", action="store_true", help="keep product nodes for the NFA sink state")
    c.add_argument("--stats", action="store_true")
    c.add_argument("--class", dest="show_class", action="store_true", help="print the decidable-class report")
    c.add_argument("--smtlib", action="store_true", help="also print the solution as SMT-LIB")
    c.add_argument("--node-budget", type=int, default=50_000, metavar="N")
    c.add_argument("--no-cache", action="store_true")
    c.add_argument("--force-solver-qe", action="store_true", help="never use Fourier-Motzkin")
    c.add_argument("--jobs", type=int, default=1, metavar="N")
    c.add_argument("--seed", type=int, default=0, metavar="N")
    return p


def _fail(code: int, category: str, msg: str) -> int:
    print(f"error [{category}]: {msg}", file=sys.stderr)
    return code


def _parse_init(items: list[str]) -> dict[str, Fraction]:
    out = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep:
            raise _UsageError(f"--init expects VAR=VALUE, got {item!r}")
        try:
            out[name.strip()] = Fraction(value.strip())
        except ValueError:
            raise _UsageError(f"--init {item!r}: invalid number") from None
    return out


def _stats_table(label: str, cls: str, model, checker: ModelChecker, wall: float) -> str:
    st = checker.stats
    solver = checker.solver_stats()
    b_size = f"{len(model.states)}/{len(model.transitions)}"
    n_size = f"{st.product_nodes}/{st.product_edges}"
    head = f"{'property':<32} {'class':<5} {'time[s]':>8} {'checks':>7} {'|B|':>7} {'sum|N|':>12}"
    row = f"{label[:32]:<32} {cls:<5} {wall:>8.2f} {solver.issued_queries:>7} {b_size:>7} {n_size:>12}"
    lines = [head, row, "", f"products: {st.products}  chP calls: {st.chp_calls}  cache hits: {st.cache_hits + solver.cache_hits}"]
    qe = checker.qe.stats
    lines.append(f"QE: fm={qe.fm_calls} solver={qe.solver_calls} substitutions={qe.substitutions}")
    for psi, b, n, e in st.per_product:
        lines.append(f"  {psi[:48]:<48} @ {b:<10} nodes={n:<6} edges={e}")
    return "\n".join(lines)


def run_check(args) -> int:
    random.seed(args.seed)
    try:
        model = load_ddsa(Path(args.model))
    except ModelError as e:
        return _fail(EXIT_MODEL, "model", str(e))
    for w in model.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.init:
        values = dict(model.init or {})
        values.update(_parse_init(args.init))
        try:
            model = model.with_init(values)
        except ModelError as e:
            return _fail(EXIT_MODEL, "model", str(e))

    try:
        if args.template:
            chi = template(model, args.template)
            label = args.template
        else:
            if args.property_file:
                try:
                    text = Path(args.property_file).read_text(encoding="utf-8").strip()
                except OSError as e:
                    return _fail(EXIT_IO, "io", f"cannot read property file: {e}")
            else:
                text = args.property
            chi = parse_property(text, model)
            label = text
    except ParseError as e:
        return _fail(EXIT_PROPERTY, "property", str(e))
    except (ModelError, ValueError) as e:
        return _fail(EXIT_PROPERTY, "property", str(e))

    try:
        model, chi = prepare(model, chi)
    except ModelError as e:
        return _fail(EXIT_PROPERTY, "property", str(e))

    report = classify(model, chi)
    if args.show_class:
        for line in report.lines():
            print(line)
    elif not report.guaranteed:
        print("warning: model is neither MC nor IPC; termination is not guaranteed", file=sys.stderr)

    try:
        config = SolverConfig(SolverKind(args.solver), args.solver_path, timeout_ms=args.timeout)
        config.executable()
    except (SolverError, ValueError) as e:
        return _fail(EXIT_SOLVER, "solver", str(e))

    t0 = time.perf_counter()
    checker = ModelChecker(
        model, config,
        cache=not args.no_cache,
        force_solver_qe=args.force_solver_qe,
        node_budget=args.node_budget,
        prune=not args.keep_sinks,
        jobs=args.jobs,
        dot_dir=args.dot,
    )
    try:
        k = checker.solve(chi)
    except BudgetExceeded as e:
        checker.close()
        return _fail(EXIT_BUDGET, "budget", str(e))
    except SolverError as e:
        checker.close()
        return _fail(EXIT_SOLVER, "solver", str(e))
    except OSError as e:
        checker.close()
        return _fail(EXIT_IO, "io", str(e))
    wall = time.perf_counter() - t0

    print(f"property: {chi}")
    print("solution:")
    width = max(len(b) for b in model.states)
    for b in sorted(model.states):
        print(f"  {b:<{width}} : {k[b]}")
    if args.smtlib:
        for b in sorted(model.states):
            print(f"; state {b}")
            print(to_smtlib_script(k[b]), end="")
    if args.stats:
        print()
        print(_stats_table(label, report.label, model, checker, wall))
    checker.close()

    witness = k[model.initial]
    if not model.has_init:
        print(f"no initial assignment; initial state {model.initial} needs: {witness}")
        return EXIT_MAP_ONLY
    ok = evaluate(witness, model.init_assignment())
    init = ", ".join(f"{n}={v}" for n, v in model.init.items())
    print(f"{'SAT' if ok else 'UNSAT'} at initial configuration ({model.initial}; {init})")
    return EXIT_SAT if ok else EXIT_UNSAT


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        parser.print_usage(sys.stderr)
        return _fail(EXIT_USAGE, "usage", str(e))
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return run_check(args)
    except _UsageError as e:
        return _fail(EXIT_USAGE, "usage", str(e))


if __name__ == "__main__":
    sys.exit(main())
