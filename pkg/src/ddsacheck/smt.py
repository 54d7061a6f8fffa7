"""SMT-LIB v2 client for an external solver process.

One long-lived process per :class:`SolverSession`; every query is wrapped in
``push``/``pop`` and terminated by an ``echo`` marker so responses can be
read back without guessing how many lines they span.
"""

from __future__ import annotations

import enum
import logging
import os
import select
import shutil
import subprocess
import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

from .constraints import (
    FALSE,
    TRUE,
    And,
    Atom,
    ConstraintError,
    Exists,
    Formula,
    LinExpr,
    Not,
    Or,
    Rel,
    Sort,
    Tag,
    Var,
    canonicalize,
    congruent,
    conj_all,
    disj_all,
    free_vars,
    is_quantifier_free,
    neg,
    substitute,
    _Const,
)

log = logging.getLogger(__name__)

SOLVER_ENV = "DDSACHECK_SOLVER"
_MARKER = "<<ddsacheck-done>>"


class SolverError(RuntimeError):
    """Solver crashed, timed out, answered unknown, or produced unparsable output."""


class Result(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


class SolverKind(enum.Enum):
    Z3 = "z3"


@dataclass
class SolverConfig:
    kind: SolverKind = SolverKind.Z3
    path: str | None = None
    timeout_ms: int = 30_000
    logic: str = "ALL"

    def __post_init__(self):
        if isinstance(self.kind, str):
            try:
                self.kind = SolverKind(self.kind.lower())
            except ValueError:
                raise SolverError(f"unsupported solver {self.kind!r}") from None
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def executable(self) -> str:
        path = self.path or os.environ.get(SOLVER_ENV) or shutil.which(self.kind.value)
        if not path:
            raise SolverError(
                f"no {self.kind.value} executable found; set {SOLVER_ENV} or pass --solver-path"
            )
        if os.sep in path and not os.access(path, os.X_OK):
            raise SolverError(f"solver executable {path!r} does not exist or is not executable")
        return path


@dataclass
class SolverStats:
    issued_queries: int = 0
    sat_queries: int = 0
    qe_queries: int = 0
    cache_hits: int = 0
    wall_time: float = 0.0

    def merge(self, other: "SolverStats") -> None:
        self.issued_queries += other.issued_queries
        self.sat_queries += other.sat_queries
        self.qe_queries += other.qe_queries
        self.cache_hits += other.cache_hits
        self.wall_time += other.wall_time


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------


def smt_symbol(v: Var) -> str:
    return f"|{v.symbol}|"


def smt_sort(s: Sort) -> str:
    return "Int" if s.is_int else "Real"


def _num(q: Fraction, is_int: bool) -> str:
    if is_int:
        if q.denominator != 1:
            raise ConstraintError(f"non-integral constant {q} in an integer term")
        n = q.numerator
        return str(n) if n >= 0 else f"(- {-n})"
    mag = abs(q)
    body = f"{mag.numerator}.0" if mag.denominator == 1 else f"(/ {mag.numerator}.0 {mag.denominator}.0)"
    return body if q >= 0 else f"(- {body})"


def _lin(e: LinExpr, is_int: bool) -> str:
    parts = []
    for v, c in e.coeffs:
        parts.append(smt_symbol(v) if c == 1 else f"(* {_num(c, is_int)} {smt_symbol(v)})")
    if e.const != 0 or not parts:
        parts.append(_num(e.const, is_int))
    return parts[0] if len(parts) == 1 else f"(+ {' '.join(parts)})"


_atom_text: dict[Atom, str] = {}


def _atom_smt(a: Atom) -> str:
    text = _atom_text.get(a)
    if text is None:
        if len(_atom_text) > 200_000:
            _atom_text.clear()
        text = _atom_text[a] = _render_atom(a)
    return text


def _render_atom(a: Atom) -> str:
    d = a.lhs - a.rhs
    is_int = a.is_int
    if a.rel is Rel.MOD:
        return f"(= (mod {_lin(d, True)} {a.modulus}) 0)"
    den = 1
    for _, c in d.coeffs:
        den = den * c.denominator // _gcd(den, c.denominator)
    den = den * d.const.denominator // _gcd(den, d.const.denominator)
    d = d.scale(den)
    lhs = LinExpr(d.coeffs)
    op = {"=": "=", "<": "<", "<=": "<="}[a.rel.value]
    return f"({op} {_lin(lhs, is_int)} {_num(-d.const, is_int)})"


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def to_smt(f: Formula) -> str:
    if isinstance(f, _Const):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return _atom_smt(f)
    if isinstance(f, Not):
        return f"(not {to_smt(f.arg)})"
    if isinstance(f, And):
        return f"(and {' '.join(to_smt(a) for a in f.args)})"
    if isinstance(f, Or):
        return f"(or {' '.join(to_smt(a) for a in f.args)})"
    if isinstance(f, Exists):
        decls = " ".join(f"({smt_symbol(v)} {smt_sort(v.sort)})" for v in f.vars)
        return f"(exists ({decls}) {to_smt(f.body)})"
    raise TypeError(f"not a formula: {f!r}")


def declarations(vs: Iterable[Var]) -> list[str]:
    return [
        f"(declare-const {smt_symbol(v)} {smt_sort(v.sort)})"
        for v in sorted(set(vs), key=lambda v: v.key)
    ]


def to_smtlib_script(f: Formula) -> str:
    """Standalone satisfiability script for ``f`` (used for --smtlib output)."""
    lines = declarations(free_vars(f))
    lines.append(f"(assert {to_smt(f)})")
    lines.append("(check-sat)")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# Reading solver output
# --------------------------------------------------------------------------


def parse_sexprs(text: str) -> list:
    """Parse S-expressions into nested lists of string tokens."""
    tokens: list[str] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == "|":
            j = text.index("|", i + 1)
            tokens.append(text[i + 1 : j])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while True:
                j = text.index('"', j)
                if j + 1 < n and text[j + 1] == '"':
                    j += 2
                    continue
                break
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in '()|";':
                j += 1
            tokens.append(text[i:j])
            i = j
    out: list = []
    stack: list[list] = [out]
    for t in tokens:
        if t == "(":
            stack.append([])
        elif t == ")":
            if len(stack) == 1:
                raise SolverError("unbalanced parentheses in solver output")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(t)
    if len(stack) != 1:
        raise SolverError("unbalanced parentheses in solver output")
    return out


class _Reader:
    """Converts solver output expressions back into :class:`Formula` values."""

    def __init__(self, symbols: Mapping[str, Var]):
        self.symbols = dict(symbols)
        self.mods: list[tuple[Var, LinExpr, int]] = []

    def fail(self, what, sx):
        raise SolverError(f"unsupported {what} in solver output: {_show(sx)}")

    def formula(self, sx, env: Mapping[str, object]) -> Formula:
        if isinstance(sx, str):
            if sx == "true":
                return TRUE
            if sx == "false":
                return FALSE
            bound = env.get(sx)
            if isinstance(bound, Formula):
                return bound
            self.fail("boolean atom", sx)
        if not sx:
            self.fail("empty expression", sx)
        head, args = sx[0], sx[1:]
        if head == "let":
            return self.formula(args[1], self._bind(args[0], env))
        if head == "not":
            return neg(self.formula(args[0], env))
        if head == "and":
            return conj_all(self.formula(a, env) for a in args)
        if head == "or":
            return disj_all(self.formula(a, env) for a in args)
        if head == "=>":
            *pre, post = args
            return disj_all([neg(self.formula(a, env)) for a in pre] + [self.formula(post, env)])
        if head == "ite":
            c = self.formula(args[0], env)
            return disj_all(
                [conj_all([c, self.formula(args[1], env)]), conj_all([neg(c), self.formula(args[2], env)])]
            )
        if isinstance(head, list) and len(head) == 3 and head[:2] == ["_", "divisible"]:
            n = int(head[2])
            return self._expand(congruent(self.term(args[0], env), LinExpr(), n))
        if head in ("=", "<", "<=", ">", ">=", "distinct"):
            terms = [self.term(a, env) for a in args]
            parts = []
            for l, r in zip(terms, terms[1:]):
                parts.append(self._expand(self._cmp(head, l, r)))
            return conj_all(parts)
        self.fail("operator", sx)

    def _cmp(self, op: str, l: LinExpr, r: LinExpr) -> Formula:
        if op == "=":
            return Atom(Rel.EQ, l, r)
        if op == "distinct":
            return neg(Atom(Rel.EQ, l, r))
        if op == "<":
            return Atom(Rel.LT, l, r)
        if op == "<=":
            return Atom(Rel.LE, l, r)
        if op == ">":
            return Atom(Rel.LT, r, l)
        return Atom(Rel.LE, r, l)

    def _bind(self, bindings, env):
        new = dict(env)
        for name, value in bindings:
            try:
                new[name] = self.term(value, env)
            except SolverError:
                new[name] = self.formula(value, env)
        return new

    def term(self, sx, env) -> LinExpr:
        if isinstance(sx, str):
            if sx in env:
                b = env[sx]
                if isinstance(b, LinExpr):
                    return b
                self.fail("boolean used as term", sx)
            if sx in self.symbols:
                return LinExpr.var(self.symbols[sx])
            try:
                return LinExpr.constant(Fraction(sx))
            except ValueError:
                self.fail("symbol", sx)
        head, args = sx[0], sx[1:]
        if head == "+":
            out = LinExpr()
            for a in args:
                out = out + self.term(a, env)
            return out
        if head == "-":
            ts = [self.term(a, env) for a in args]
            if len(ts) == 1:
                return -ts[0]
            out = ts[0]
            for t in ts[1:]:
                out = out - t
            return out
        if head == "*":
            ts = [self.term(a, env) for a in args]
            out = LinExpr.constant(1)
            for t in ts:
                if t.is_constant:
                    out = out.scale(t.const)
                elif out.is_constant:
                    out = t.scale(out.const)
                else:
                    self.fail("nonlinear product", sx)
            return out
        if head == "/":
            ts = [self.term(a, env) for a in args]
            if len(ts) != 2 or not ts[1].is_constant or ts[1].const == 0:
                self.fail("division", sx)
            return ts[0].scale(1 / ts[1].const)
        if head == "to_real":
            return self.term(args[0], env)
        if head == "let":
            return self.term(args[1], self._bind(args[0], env))
        if head == "mod":
            t = self.term(args[0], env)
            n = self.term(args[1], env)
            if not n.is_constant or n.const.denominator != 1 or n.const <= 0:
                self.fail("modulus", sx)
            p = Var(f"__mod{len(self.mods)}", Sort.INT, Tag.FRESH)
            self.mods.append((p, t, int(n.const)))
            return LinExpr.var(p)
        self.fail("term", sx)

    def _expand(self, f: Formula) -> Formula:
        """Replace ``mod`` placeholders by a case split over residues."""
        pending = [m for m in reversed(self.mods) if m[0] in free_vars(f)]
        if not pending:
            return f
        p, t, n = pending[0]
        cases = []
        for r in range(n):
            case = substitute(f, {p: LinExpr.constant(r)})
            cases.append(conj_all([self._expand(congruent(t, LinExpr.constant(r), n)), self._expand(case)]))
        return disj_all(cases)


def _show(sx) -> str:
    if isinstance(sx, list):
        return "(" + " ".join(_show(x) for x in sx) + ")"
    return str(sx)


def formula_from_goals(sx, symbols: Mapping[str, Var]) -> Formula:
    """Interpret a ``(goals (goal ...)...)`` tactic result as a disjunction."""
    if not isinstance(sx, list) or not sx or sx[0] != "goals":
        raise SolverError(f"unexpected tactic output: {_show(sx)}")
    reader = _Reader(symbols)
    disjuncts = []
    for goal in sx[1:]:
        if not isinstance(goal, list) or not goal or goal[0] != "goal":
            raise SolverError(f"unexpected goal: {_show(goal)}")
        items = goal[1:]
        conjuncts = []
        i = 0
        while i < len(items):
            it = items[i]
            if isinstance(it, str) and it.startswith(":"):
                i += 2
                continue
            conjuncts.append(reader.formula(it, {}))
            i += 1
        disjuncts.append(conj_all(conjuncts))
    return disj_all(disjuncts)


def parse_smt_formula(text: str, symbols: Mapping[str, Var]) -> Formula:
    exprs = parse_sexprs(text)
    if len(exprs) != 1:
        raise SolverError("expected exactly one expression")
    reader = _Reader(symbols)
    return reader.formula(exprs[0], {})


# --------------------------------------------------------------------------
# Session
# --------------------------------------------------------------------------

# tactics tried in order for quantifier elimination; each result is verified
QE_TACTICS = ("(then qe simplify)", "(then qe_rec simplify)", "(then qe2 simplify)")


class SolverSession:
    """Exclusive handle on one solver process with a satisfiability cache."""

    def __init__(self, config: SolverConfig | None = None, cache: bool = True):
        self.config = config or SolverConfig()
        self.stats = SolverStats()
        self.use_cache = cache
        self._sat_cache: dict[Formula, Result] = {}
        self._qe_cache: dict[tuple, Formula] = {}
        self._proc: subprocess.Popen | None = None
        self._buf = b""
        self._lock = threading.Lock()
        self.last_diagnostic = ""

    # process management ------------------------------------------------
    def _start(self) -> None:
        exe = self.config.executable()
        try:
            self._proc = subprocess.Popen(
                [exe, "-in", "-smt2"],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                bufsize=0,
            )
        except OSError as e:
            raise SolverError(f"cannot start solver {exe}: {e}") from None
        self._buf = b""
        self._send(
            [
                "(set-option :print-success false)",
                f"(set-option :timeout {self.config.timeout_ms})",
                f"(set-logic {self.config.logic})",
            ]
        )

    def close(self) -> None:
        p = self._proc
        self._proc = None
        if p is not None:
            try:
                p.stdin.write(b"(exit)\n")
                p.stdin.flush()
                p.wait(timeout=2)
            except Exception:
                p.kill()
                p.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def _send(self, lines: list[str]) -> None:
        if self._proc is None:
            self._start()
        data = ("\n".join(lines) + "\n").encode()
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as e:
            self._kill()
            raise SolverError(f"solver process died: {e}") from None

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def _read_until_marker(self, deadline: float) -> str:
        marker = (_MARKER + "\n").encode()
        fd = self._proc.stdout.fileno()
        while marker not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._kill()
                raise SolverError("solver did not answer before the deadline")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                self._kill()
                raise SolverError("solver process terminated unexpectedly")
            self._buf += chunk
        out, _, self._buf = self._buf.partition(marker)
        return out.decode()

    def _roundtrip(self, lines: list[str]) -> str:
        if self._proc is None:
            self._start()
        t0 = time.perf_counter()
        self._send(["(push 1)"] + lines + ["(pop 1)", f'(echo "{_MARKER}")'])
        # generous wall-clock guard on top of the solver's own timeout
        slack = max(5.0, 2 * self.config.timeout_ms / 1000)
        try:
            out = self._read_until_marker(time.monotonic() + slack)
        finally:
            self.stats.wall_time += time.perf_counter() - t0
            self.stats.issued_queries += 1
        return out

    # queries -----------------------------------------------------------
    def check_sat(self, f: Formula) -> Result:
        """SAT/UNSAT/UNKNOWN; failures are reported as UNKNOWN with a diagnostic."""
        key = canonicalize(f)
        if key == TRUE:
            return Result.SAT
        if key == FALSE:
            return Result.UNSAT
        with self._lock:
            if self.use_cache and key in self._sat_cache:
                self.stats.cache_hits += 1
                return self._sat_cache[key]
            lines = declarations(free_vars(key))
            # the incremental core gives up on quantifiers inside push/pop; qsat decides them
            check = "(check-sat)" if is_quantifier_free(key) else "(check-sat-using (or-else qsat smt))"
            lines += [f"(assert {to_smt(key)})", check]
            self.stats.sat_queries += 1
            try:
                out = self._roundtrip(lines)
            except SolverError as e:
                self.last_diagnostic = str(e)
                return Result.UNKNOWN
            answer = out.strip().splitlines()[-1].strip() if out.strip() else ""
            if answer in ("sat", "unsat"):
                res = Result(answer)
                if self.use_cache:
                    self._sat_cache[key] = res
                return res
            self.last_diagnostic = out.strip() or "empty solver response"
            return Result.UNKNOWN

    def is_sat(self, f: Formula) -> bool:
        """Like :meth:`check_sat` but raises on UNKNOWN."""
        r = self.check_sat(f)
        if r is Result.UNKNOWN:
            raise SolverError(f"solver returned unknown: {self.last_diagnostic}")
        return r is Result.SAT

    def is_valid(self, f: Formula) -> bool:
        return not self.is_sat(neg(f))

    def check_equiv(self, f: Formula, g: Formula) -> bool:
        f, g = canonicalize(f), canonicalize(g)
        if f == g:
            return True
        if g.sort_key < f.sort_key:
            f, g = g, f
        xor = Or([And([f, Not(g)]), And([Not(f), g])])
        return not self.is_sat(xor)

    def solver_eliminate(self, vars: Iterable[Var], f: Formula) -> Formula:
        """Quantifier-free formula equivalent to ``∃vars. f`` via solver QE.

        Each tactic's answer is checked for equivalence with the quantified
        input before it is accepted.
        """
        f = canonicalize(f)
        fv = free_vars(f)
        targets = tuple(sorted((v for v in set(vars) if v in fv), key=lambda v: v.key))
        if not targets:
            return f
        key = (targets, f)
        with self._lock:
            if self.use_cache and key in self._qe_cache:
                self.stats.cache_hits += 1
                return self._qe_cache[key]
        rest = fv - set(targets)
        symbols = {v.symbol: v for v in rest}
        quantified = Exists(targets, f)
        errors = []
        for tactic in QE_TACTICS:
            with self._lock:
                lines = declarations(rest)
                lines += [
                    f"(assert {to_smt(quantified)})",
                    f"(apply (try-for {tactic} {self.config.timeout_ms}))",
                ]
                self.stats.qe_queries += 1
                out = self._roundtrip(lines)
            if "(error" in out:
                errors.append(f"{tactic}: {out.strip()}")
                continue
            exprs = parse_sexprs(out)
            if len(exprs) != 1:
                errors.append(f"{tactic}: unexpected output {out.strip()!r}")
                continue
            try:
                g = canonicalize(formula_from_goals(exprs[0], symbols))
            except (SolverError, ConstraintError) as e:
                errors.append(f"{tactic}: {e}")
                continue
            if not self._verify_qe(quantified, g):
                log.warning("solver QE tactic %s produced a non-equivalent result", tactic)
                errors.append(f"{tactic}: result failed the equivalence check")
                continue
            with self._lock:
                if self.use_cache:
                    self._qe_cache[key] = g
            return g
        raise SolverError("quantifier elimination failed: " + "; ".join(errors))

    def _verify_qe(self, quantified: Exists, g: Formula) -> bool:
        if free_vars(g) - free_vars(quantified):
            return False
        xor = Or([And([quantified, Not(g)]), And([Not(quantified), g])])
        with self._lock:
            lines = declarations(free_vars(xor))
            # the incremental core gives up on quantifiers inside push/pop; qsat decides them
            lines += [f"(assert {to_smt(xor)})", "(check-sat-using (or-else qsat smt))"]
            self.stats.sat_queries += 1
            out = self._roundtrip(lines).strip()
        return out.endswith("unsat")

    def raw(self, lines: list[str]) -> str:
        """Send raw SMT-LIB commands inside a push/pop scope and return the output."""
        with self._lock:
            return self._roundtrip(lines)
