"""Tokenizer and recursive-descent parser for the textual constraint syntax.

    formula := disj
    disj    := conj ("||" conj)*
    conj    := lit ("&&" lit)*
    lit     := "!" lit | "(" formula ")" | "true" | "false" | atom
    atom    := term cmp term (cmp term)*  |  term "%" NAT "=" term "%" NAT
    term    := ["-"] factor (("+"|"-") factor)*
    factor  := NUMBER | NUMBER "*" VAR | VAR | VAR "'"

Chained comparisons such as ``0 <= d' <= 1440`` expand to a conjunction.
In guards, ``v`` is the read copy and ``v'`` the write copy; in properties
only plain variables are allowed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping

from .constraints import (
    FALSE,
    TRUE,
    Atom,
    ConstraintError,
    Formula,
    LinExpr,
    Rel,
    Sort,
    Tag,
    Var,
    conj_all,
    disj_all,
    neg,
)


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int = -1, where: str = ""):
        self.message = message
        self.text = text
        self.pos = pos
        self.where = where
        loc = f" at column {pos + 1}" if pos >= 0 else ""
        prefix = f"{where}: " if where else ""
        super().__init__(f"{prefix}{message}{loc}")


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, ID, OP, EOF
    text: str
    pos: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:/\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|!=|==|&&|\|\||[()<>=!&|+\-*%'])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list[Token]:
    out: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind.upper(), m.group(), pos))
        pos = m.end()
    out.append(Token("EOF", "", len(text)))
    return out


def parse_number(text: str) -> Fraction:
    return Fraction(text)


Resolver = Callable[[str, bool, int], Var]

_CMP = {"=", "==", "!=", "<", "<=", ">", ">="}


class TokenStream:
    def __init__(self, text: str, where: str = ""):
        self.text = text
        self.where = where
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "ID") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, msg: str, tok: Token | None = None):
        t = tok or self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(f"{msg}, found {found}", self.text, t.pos, self.where)


class ConstraintParser:
    """Parses constraints from a :class:`TokenStream`; reusable by the property parser."""

    keywords: frozenset[str] = frozenset({"true", "false"})

    def __init__(self, ts: TokenStream, resolve: Resolver):
        self.ts = ts
        self.resolve = resolve

    # formula level -----------------------------------------------------
    def formula(self) -> Formula:
        parts = [self.conj()]
        while self.ts.at("||"):
            self.ts.advance()
            parts.append(self.conj())
        return disj_all(parts) if len(parts) > 1 else parts[0]

    def conj(self) -> Formula:
        parts = [self.lit()]
        while self.ts.at("&&"):
            self.ts.advance()
            parts.append(self.lit())
        return conj_all(parts) if len(parts) > 1 else parts[0]

    def lit(self) -> Formula:
        ts = self.ts
        if ts.at("!"):
            ts.advance()
            return neg(self.lit())
        if ts.at("("):
            ts.advance()
            f = self.formula()
            ts.expect(")")
            return f
        if ts.at("true"):
            ts.advance()
            return TRUE
        if ts.at("false"):
            ts.advance()
            return FALSE
        return self.atom()

    # atoms ---------------------------------------------------------------
    def starts_term(self) -> bool:
        t = self.ts.tok
        if t.kind == "NUM":
            return True
        if t.kind == "OP" and t.text == "-":
            return True
        return t.kind == "ID" and t.text not in self.keywords

    def atom(self) -> Formula:
        ts = self.ts
        start = ts.tok
        if not self.starts_term():
            ts.error("expected a constraint")
        lhs = self.term()
        if ts.at("%"):
            return self._congruence(lhs, start)
        if not (ts.tok.kind == "OP" and ts.tok.text in _CMP):
            ts.error("expected a comparison operator")
        parts: list[Formula] = []
        while ts.tok.kind == "OP" and ts.tok.text in _CMP:
            op = ts.advance().text
            rhs = self.term()
            parts.append(self._compare(op, lhs, rhs, start))
            lhs = rhs
        return conj_all(parts)

    def _compare(self, op: str, lhs: LinExpr, rhs: LinExpr, start: Token) -> Formula:
        try:
            if op in ("=", "=="):
                return Atom(Rel.EQ, lhs, rhs)
            if op == "!=":
                return neg(Atom(Rel.EQ, lhs, rhs))
            if op == "<":
                return Atom(Rel.LT, lhs, rhs)
            if op == "<=":
                return Atom(Rel.LE, lhs, rhs)
            if op == ">":
                return Atom(Rel.LT, rhs, lhs)
            return Atom(Rel.LE, rhs, lhs)
        except ConstraintError as e:
            raise ParseError(str(e), self.ts.text, start.pos, self.ts.where) from None

    def _modulus(self) -> int:
        ts = self.ts
        ts.expect("%")
        t = ts.tok
        if t.kind != "NUM" or not t.text.isdigit() or int(t.text) < 1:
            ts.error("expected a positive integer modulus")
        ts.advance()
        return int(t.text)

    def _congruence(self, lhs: LinExpr, start: Token) -> Formula:
        ts = self.ts
        n = self._modulus()
        op = ts.tok
        if not ts.at("=", "=="):
            ts.error("expected '=' in congruence")
        ts.advance()
        rhs = self.term()
        if ts.at("%"):
            m = self._modulus()
            if m != n:
                raise ParseError(
                    f"moduli differ ({n} and {m})", ts.text, op.pos, ts.where
                )
        try:
            return Atom(Rel.MOD, lhs, rhs, n)
        except ConstraintError as e:
            raise ParseError(str(e), ts.text, start.pos, ts.where) from None

    def term(self) -> LinExpr:
        ts = self.ts
        sign = 1
        if ts.at("-"):
            ts.advance()
            sign = -1
        acc = self.factor().scale(sign)
        while ts.at("+", "-"):
            op = ts.advance().text
            f = self.factor()
            try:
                acc = acc + f if op == "+" else acc - f
            except ConstraintError as e:
                raise ParseError(str(e), ts.text, ts.tok.pos, ts.where) from None
        return acc

    def factor(self) -> LinExpr:
        ts = self.ts
        t = ts.tok
        if t.kind == "NUM":
            ts.advance()
            value = parse_number(t.text)
            if ts.at("*"):
                ts.advance()
                return self._variable().scale(value)
            return LinExpr.constant(value)
        if t.kind == "ID" and t.text not in self.keywords:
            return self._variable()
        ts.error("expected a number or variable")

    def _variable(self) -> LinExpr:
        ts = self.ts
        t = ts.tok
        if t.kind != "ID" or t.text in self.keywords:
            ts.error("expected a variable")
        ts.advance()
        primed = False
        if ts.at("'"):
            ts.advance()
            primed = True
        try:
            v = self.resolve(t.text, primed, t.pos)
        except ParseError:
            raise
        except (KeyError, ValueError) as e:
            msg = e.args[0] if e.args else str(e)
            raise ParseError(str(msg), ts.text, t.pos, ts.where) from None
        return LinExpr.var(v)


def guard_resolver(variables: Mapping[str, Sort]) -> Resolver:
    def resolve(name: str, primed: bool, pos: int) -> Var:
        if name not in variables:
            raise KeyError(f"unknown variable {name!r}")
        return Var(name, variables[name], Tag.WRITE if primed else Tag.READ)

    return resolve


def plain_resolver(variables: Mapping[str, Sort]) -> Resolver:
    def resolve(name: str, primed: bool, pos: int) -> Var:
        if primed:
            raise ValueError(f"primed variable {name}' is only allowed in guards")
        if name not in variables:
            raise KeyError(f"unknown variable {name!r}")
        return Var(name, variables[name], Tag.PLAIN)

    return resolve


def _parse(text: str, resolve: Resolver, where: str) -> Formula:
    ts = TokenStream(text, where)
    f = ConstraintParser(ts, resolve).formula()
    if ts.tok.kind != "EOF":
        ts.error("unexpected trailing input")
    return f


def parse_guard(text: str, variables: Mapping[str, Sort], where: str = "") -> Formula:
    """Parse a guard: ``v`` is the read copy, ``v'`` the write copy."""
    return _parse(text, guard_resolver(variables), where)


def parse_constraint(text: str, variables: Mapping[str, Sort], where: str = "") -> Formula:
    """Parse a constraint over plain (unprimed) variables."""
    return _parse(text, plain_resolver(variables), where)
