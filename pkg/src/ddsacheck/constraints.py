"""Linear-arithmetic constraints over sorted variables.

Terms are linear expressions with exact rational coefficients, atoms compare
two terms with ``=``, ``<``, ``<=`` or congruence modulo ``n``, and formulas
are boolean combinations of atoms (plus an explicit existential node that
only lives until quantifier elimination removes it).

Every value here is immutable and hashable; formula nodes cache their hash
and a textual sort key, since formulas are used as dictionary keys all over
the checker (solver cache, product-node buckets, configuration maps).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping


class ConstraintError(ValueError):
    """Raised for ill-sorted or otherwise malformed constraints."""


class Sort(enum.Enum):
    INT = "int"
    RAT = "rat"
    REAL = "real"

    @property
    def is_int(self) -> bool:
        return self is Sort.INT


class Tag(enum.Enum):
    PLAIN = 0
    READ = 1
    WRITE = 2
    INITIAL = 3
    FRESH = 4


@dataclass(frozen=True)
class Var:
    name: str
    sort: Sort = Sort.RAT
    tag: Tag = Tag.PLAIN

    def __post_init__(self):
        object.__setattr__(self, "key", (self.name, self.tag.value))
        object.__setattr__(self, "_hash", hash((self.name, self.sort.value, self.tag.value)))

    def __hash__(self) -> int:
        return self._hash

    @property
    def symbol(self) -> str:
        """Unique identifier, also used as the SMT-LIB symbol."""
        if self.tag is Tag.READ:
            return f"{self.name}__r"
        if self.tag is Tag.WRITE:
            return f"{self.name}__w"
        if self.tag is Tag.INITIAL:
            return f"{self.name}__0"
        return self.name

    def __str__(self) -> str:
        if self.tag is Tag.WRITE:
            return f"{self.name}'"
        if self.tag is Tag.INITIAL:
            return f"{self.name}__0"
        return self.name

    def with_tag(self, tag: Tag) -> "Var":
        return Var(self.name, self.sort, tag)


def _frac(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        raise ConstraintError("floating point constants are not allowed")
    return Fraction(value)


def _num_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def _coeff_order(vc) -> tuple:
    return vc[0].key


class LinExpr:
    """A linear expression ``sum(c_i * v_i) + const`` with rational coefficients."""

    __slots__ = ("coeffs", "const", "_hash")

    def __init__(self, coeffs: Mapping[Var, Fraction] | Iterable = (), const=0):
        items = coeffs.items() if isinstance(coeffs, dict) else coeffs
        merged: dict[Var, Fraction] = {}
        for v, c in items:
            if type(c) is not Fraction:
                c = _frac(c)
            old = merged.get(v)
            merged[v] = c if old is None else old + c
        self.coeffs: tuple[tuple[Var, Fraction], ...] = tuple(
            sorted(((v, c) for v, c in merged.items() if c), key=_coeff_order)
        )
        self.const: Fraction = const if type(const) is Fraction else _frac(const)
        if len(self.coeffs) > 1:
            first = self.coeffs[0][0].sort.is_int
            if any(v.sort.is_int != first for v, _ in self.coeffs):
                raise ConstraintError(f"mixed integer and rational variables in {self}")
        self._hash = hash((self.coeffs, self.const))

    @classmethod
    def var(cls, v: Var) -> "LinExpr":
        return cls({v: Fraction(1)})

    @classmethod
    def constant(cls, c) -> "LinExpr":
        return cls((), c)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, LinExpr)
            and self._hash == other._hash
            and self.coeffs == other.coeffs
            and self.const == other.const
        )

    def __hash__(self) -> int:
        return self._hash

    def __add__(self, other: "LinExpr") -> "LinExpr":
        return LinExpr(self.coeffs + other.coeffs, self.const + other.const)

    def __neg__(self) -> "LinExpr":
        return LinExpr(((v, -c) for v, c in self.coeffs), -self.const)

    def __sub__(self, other: "LinExpr") -> "LinExpr":
        return self + (-other)

    def scale(self, k) -> "LinExpr":
        k = _frac(k)
        return LinExpr(((v, c * k) for v, c in self.coeffs), self.const * k)

    @property
    def vars(self) -> frozenset[Var]:
        return frozenset(v for v, _ in self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    @property
    def sort(self) -> Sort | None:
        return self.coeffs[0][0].sort if self.coeffs else None

    def coeff(self, v: Var) -> Fraction:
        for w, c in self.coeffs:
            if w == v:
                return c
        return Fraction(0)

    def without_const(self) -> "LinExpr":
        return LinExpr(self.coeffs, 0)

    def substitute(self, mapping: Mapping[Var, "LinExpr"]) -> "LinExpr":
        out = LinExpr((), self.const)
        for v, c in self.coeffs:
            out = out + (mapping[v].scale(c) if v in mapping else LinExpr({v: c}))
        return out

    def evaluate(self, assignment: Mapping[Var, Fraction]) -> Fraction:
        total = self.const
        for v, c in self.coeffs:
            try:
                total += c * assignment[v]
            except KeyError:
                raise ConstraintError(f"variable {v} is unbound") from None
        return total

    def __str__(self) -> str:
        parts: list[str] = []
        for v, c in self.coeffs:
            mag = abs(c)
            body = str(v) if mag == 1 else f"{_num_str(mag)}*{v}"
            if not parts:
                parts.append(body if c > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if c > 0 else f"- {body}")
        if self.const != 0 or not parts:
            if not parts:
                parts.append(_num_str(self.const))
            elif self.const > 0:
                parts.append(f"+ {_num_str(self.const)}")
            else:
                parts.append(f"- {_num_str(-self.const)}")
        return " ".join(parts)

    __repr__ = __str__


def term(x) -> LinExpr:
    """Coerce a variable, number, or expression to a :class:`LinExpr`."""
    if isinstance(x, LinExpr):
        return x
    if isinstance(x, Var):
        return LinExpr.var(x)
    return LinExpr.constant(x)


# --------------------------------------------------------------------------
# Formulas
# --------------------------------------------------------------------------


class Formula:
    __slots__ = ("_hash", "_text")

    def _key(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        return (
            type(self) is type(other)
            and hash(self) == hash(other)
            and self._key() == other._key()
        )

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            self._hash = hash((type(self).__name__,) + self._key())
            return self._hash

    def __str__(self) -> str:
        try:
            return self._text
        except AttributeError:
            self._text = self._render()
            return self._text

    def __repr__(self) -> str:
        return f"<{str(self)}>"

    def _render(self) -> str:
        raise NotImplementedError

    @property
    def sort_key(self) -> str:
        return str(self)

    # convenience combinators
    def __and__(self, other: "Formula") -> "Formula":
        return conj(self, other)

    def __or__(self, other: "Formula") -> "Formula":
        return disj(self, other)

    def __invert__(self) -> "Formula":
        return neg(self)


class _Const(Formula):
    __slots__ = ("value",)

    def __init__(self, value: bool):
        self.value = value

    def _key(self):
        return (self.value,)

    def _render(self):
        return "true" if self.value else "false"


TRUE = _Const(True)
FALSE = _Const(False)


class Rel(enum.Enum):
    EQ = "="
    LT = "<"
    LE = "<="
    MOD = "%"


class Atom(Formula):
    """``lhs rel rhs``; for ``Rel.MOD`` the atom means ``lhs ≡ rhs (mod modulus)``."""

    __slots__ = ("rel", "lhs", "rhs", "modulus")

    def __init__(self, rel: Rel, lhs, rhs, modulus: int = 0):
        self.rel = rel
        self.lhs = term(lhs)
        self.rhs = term(rhs)
        self.modulus = modulus
        sorts = {t.sort.is_int for t in (self.lhs, self.rhs) if t.sort is not None}
        if len(sorts) > 1:
            raise ConstraintError("atom compares integer and rational terms")
        if rel is Rel.MOD:
            if modulus < 1:
                raise ConstraintError("modulus must be at least 1")
            if sorts and sorts != {True}:
                raise ConstraintError("congruence atoms require integer terms")
            for t in (self.lhs, self.rhs):
                if any(c.denominator != 1 for _, c in t.coeffs) or t.const.denominator != 1:
                    raise ConstraintError("congruence atoms require integral coefficients")
        elif modulus:
            raise ConstraintError("modulus given for a non-congruence atom")

    def _key(self):
        return (self.rel.value, self.lhs, self.rhs, self.modulus)

    @property
    def vars(self) -> frozenset[Var]:
        return self.lhs.vars | self.rhs.vars

    @property
    def is_int(self) -> bool:
        s = self.lhs.sort or self.rhs.sort
        return bool(s and s.is_int)

    def _render(self):
        # variables with positive coefficients on the left, the rest on the right
        d = self.lhs - self.rhs
        if not d.coeffs:
            return f"{self.lhs} {self.rel.value} {self.rhs}"
        op = self.rel.value
        if all(c < 0 for _, c in d.coeffs):
            d = -d
            op = {"<": ">", "<=": ">="}.get(op, op)
        left = LinExpr((v, c) for v, c in d.coeffs if c > 0)
        right = LinExpr(((v, -c) for v, c in d.coeffs if c < 0), -d.const)
        if self.rel is Rel.MOD:
            n = self.modulus
            return f"{left} % {n} = {right} % {n}"
        return f"{left} {op} {right}"


class Not(Formula):
    __slots__ = ("arg",)

    def __init__(self, arg: Formula):
        self.arg = arg

    def _key(self):
        return (self.arg,)

    def _render(self):
        a = self.arg
        if isinstance(a, Atom) and a.rel is Rel.EQ:
            return f"{a.lhs} != {a.rhs}"
        return f"!({a})"


class _NAry(Formula):
    __slots__ = ("args",)
    op = ""

    def __init__(self, args: Iterable[Formula]):
        self.args = tuple(args)

    def _key(self):
        return self.args

    def _render(self):
        def wrap(a):
            return f"({a})" if isinstance(a, _NAry) or isinstance(a, Exists) else str(a)

        return f" {self.op} ".join(wrap(a) for a in self.args)


class And(_NAry):
    __slots__ = ()
    op = "&&"


class Or(_NAry):
    __slots__ = ()
    op = "||"


class Exists(Formula):
    __slots__ = ("vars", "body")

    def __init__(self, vars: Iterable[Var], body: Formula):
        self.vars = tuple(vars)
        self.body = body

    def _key(self):
        return (self.vars, self.body)

    def _render(self):
        return f"exists {' '.join(str(v) for v in self.vars)}. ({self.body})"


# smart constructors -------------------------------------------------------


def eq(a, b) -> Atom:
    return Atom(Rel.EQ, a, b)


def lt(a, b) -> Atom:
    return Atom(Rel.LT, a, b)


def le(a, b) -> Atom:
    return Atom(Rel.LE, a, b)


def gt(a, b) -> Atom:
    return Atom(Rel.LT, b, a)


def ge(a, b) -> Atom:
    return Atom(Rel.LE, b, a)


def ne(a, b) -> Formula:
    return Not(Atom(Rel.EQ, a, b))


def congruent(a, b, n: int) -> Atom:
    return Atom(Rel.MOD, a, b, n)


def conj(*args: Formula) -> Formula:
    items = [a for a in args if a is not TRUE and a != TRUE]
    if any(a == FALSE for a in items):
        return FALSE
    if not items:
        return TRUE
    if len(items) == 1:
        return items[0]
    return And(items)


def disj(*args: Formula) -> Formula:
    items = [a for a in args if a != FALSE]
    if any(a == TRUE for a in items):
        return TRUE
    if not items:
        return FALSE
    if len(items) == 1:
        return items[0]
    return Or(items)


def conj_all(items: Iterable[Formula]) -> Formula:
    return conj(*items)


def disj_all(items: Iterable[Formula]) -> Formula:
    return disj(*items)


def neg(f: Formula) -> Formula:
    if f == TRUE:
        return FALSE
    if f == FALSE:
        return TRUE
    if isinstance(f, Not):
        return f.arg
    return Not(f)


def exists(vars: Iterable[Var], body: Formula) -> Formula:
    vs = tuple(vars)
    return Exists(vs, body) if vs else body


# --------------------------------------------------------------------------
# Queries
# --------------------------------------------------------------------------


def free_vars(f: Formula) -> frozenset[Var]:
    if isinstance(f, Atom):
        return f.vars
    if isinstance(f, _Const):
        return frozenset()
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, _NAry):
        out: frozenset[Var] = frozenset()
        for a in f.args:
            out |= free_vars(a)
        return out
    if isinstance(f, Exists):
        return free_vars(f.body) - frozenset(f.vars)
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms(f.arg)
    elif isinstance(f, _NAry):
        for a in f.args:
            yield from atoms(a)
    elif isinstance(f, Exists):
        yield from atoms(f.body)


def is_quantifier_free(f: Formula) -> bool:
    if isinstance(f, Exists):
        return False
    if isinstance(f, Not):
        return is_quantifier_free(f.arg)
    if isinstance(f, _NAry):
        return all(is_quantifier_free(a) for a in f.args)
    return True


def substitute(f: Formula, mapping: Mapping[Var, LinExpr]) -> Formula:
    """Replace free variables by linear expressions (no capture check)."""
    if not mapping:
        return f
    if isinstance(f, Atom):
        if not (f.vars & mapping.keys()):
            return f
        return Atom(f.rel, f.lhs.substitute(mapping), f.rhs.substitute(mapping), f.modulus)
    if isinstance(f, _Const):
        return f
    if isinstance(f, Not):
        return Not(substitute(f.arg, mapping))
    if isinstance(f, _NAry):
        return type(f)(substitute(a, mapping) for a in f.args)
    if isinstance(f, Exists):
        inner = {v: t for v, t in mapping.items() if v not in f.vars}
        return Exists(f.vars, substitute(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


def rename(f: Formula, mapping: Mapping[Var, Var]) -> Formula:
    """Simultaneous, capture-avoiding renaming of free variables.

    The map must be injective on the free variables of ``f`` and preserve sorts.
    """
    fv = free_vars(f)
    relevant = {v: w for v, w in mapping.items() if v in fv and v != w}
    targets = [relevant.get(v, v) for v in fv]
    if len(set(targets)) != len(targets):
        raise ConstraintError("renaming is not injective on the free variables")
    for v, w in relevant.items():
        if v.sort.is_int != w.sort.is_int:
            raise ConstraintError(f"renaming {v} -> {w} changes the sort")
    return _rename(f, relevant)


def _rename(f: Formula, mapping: Mapping[Var, Var]) -> Formula:
    if not mapping:
        return f
    if isinstance(f, Exists):
        inner = {v: w for v, w in mapping.items() if v not in f.vars}
        clash = set(f.vars) & set(inner.values())
        body, bound = f.body, list(f.vars)
        if clash:
            used = {v.name for v in free_vars(f.body)} | {w.name for w in inner.values()}
            fresh = {}
            for v in clash:
                i = 0
                while f"{v.name}_{i}" in used:
                    i += 1
                used.add(f"{v.name}_{i}")
                fresh[v] = Var(f"{v.name}_{i}", v.sort, Tag.FRESH)
            body = _rename(body, fresh)
            bound = [fresh.get(v, v) for v in bound]
        return Exists(bound, _rename(body, inner))
    return substitute(f, {v: LinExpr.var(w) for v, w in mapping.items()})


def evaluate(f: Formula, assignment: Mapping[Var, Fraction]) -> bool:
    """Truth value of a quantifier-free formula under exact arithmetic."""
    if isinstance(f, _Const):
        return f.value
    if isinstance(f, Atom):
        lv = f.lhs.evaluate(assignment)
        rv = f.rhs.evaluate(assignment)
        if f.rel is Rel.EQ:
            return lv == rv
        if f.rel is Rel.LT:
            return lv < rv
        if f.rel is Rel.LE:
            return lv <= rv
        d = lv - rv
        if d.denominator != 1:
            raise ConstraintError("congruence evaluated on a non-integer value")
        return d.numerator % f.modulus == 0
    if isinstance(f, Not):
        return not evaluate(f.arg, assignment)
    if isinstance(f, And):
        return all(evaluate(a, assignment) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, assignment) for a in f.args)
    if isinstance(f, Exists):
        raise ConstraintError("cannot evaluate a quantified formula")
    raise TypeError(f"not a formula: {f!r}")


# --------------------------------------------------------------------------
# Fragment membership
# --------------------------------------------------------------------------


def mc_constant(a: Atom) -> Fraction | None:
    """The constant of a variable-to-constant MC atom, ``None`` for var-to-var."""
    n = canonical_atom(a)
    if not isinstance(n, Atom) or len(n.lhs.coeffs) != 1:
        return None
    (_, c), = n.lhs.coeffs
    return n.rhs.const / c


def atom_is_mc(a: Atom) -> bool:
    if a.rel is Rel.MOD:
        return False
    if any(v.sort.is_int for v in a.vars):
        return False
    n = canonical_atom(a)
    if not isinstance(n, Atom):
        return True
    cs = [c for _, c in n.lhs.coeffs]
    if len(cs) == 1:
        return True
    if len(cs) == 2:
        return n.rhs.const == 0 and cs[0] == -cs[1]
    return False


def is_mc(f: Formula, allowed_consts: Iterable | None = None) -> bool:
    """Every atom compares variable/variable or variable/constant over ℚ or ℝ."""
    allowed = None if allowed_consts is None else {_frac(c) for c in allowed_consts}
    for a in atoms(f):
        if not atom_is_mc(a):
            return False
        if allowed is not None:
            c = mc_constant(a)
            if c is not None and c not in allowed:
                return False
    return True


def atom_is_ipc(a: Atom) -> bool:
    vs = a.vars
    if not vs:
        return True
    if not all(v.sort.is_int for v in vs):
        return False
    d = a.lhs - a.rhs
    cs = [c for _, c in d.coeffs]
    if a.rel is Rel.MOD:
        n = a.modulus
        red = [int(c) % n for c in cs]
        if len(red) == 1:
            return red[0] in (1 % n, (-1) % n)
        if len(red) == 2:
            return sorted(red) == sorted([1 % n, (-1) % n])
        return len(red) == 0
    if len(cs) == 1:
        return abs(cs[0]) == 1
    if len(cs) == 2:
        return a.rel is Rel.EQ and d.const == 0 and cs[0] == -cs[1] and abs(cs[0]) == 1
    return False


def is_ipc(f: Formula) -> bool:
    return all(atom_is_ipc(a) for a in atoms(f))


def constants_of(f: Formula) -> set[Fraction]:
    """Constants ``d`` of MC/IPC-shaped atoms (``x ⊙ d``, ``x ≡ y + d``)."""
    out: set[Fraction] = set()
    for a in atoms(f):
        d = a.lhs - a.rhs
        if a.rel is Rel.MOD:
            out.add(Fraction(int(-d.const) % a.modulus))
            continue
        if len(d.coeffs) == 1:
            (_, c), = d.coeffs
            out.add(-d.const / c)
        elif len(d.coeffs) == 0:
            continue
        elif d.const != 0:
            out.add(-d.const)
    return out


def moduli_of(f: Formula) -> set[int]:
    return {a.modulus for a in atoms(f) if a.rel is Rel.MOD}


# --------------------------------------------------------------------------
# Canonical form
# --------------------------------------------------------------------------


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


_CACHE_LIMIT = 200_000
_atom_cache: dict[Atom, Formula] = {}
_canon_cache: dict[Formula, Formula] = {}


def _remember(cache: dict, key, value):
    if len(cache) >= _CACHE_LIMIT:
        cache.clear()
    cache[key] = value
    return value


def canonical_atom(a: Atom) -> Formula:
    """Normal form ``vars rel const`` with integral, gcd-reduced coefficients.

    Variable-free atoms fold to TRUE/FALSE. Over the integers strict bounds
    become non-strict ones and congruences are reduced modulo ``n``.
    """
    hit = _atom_cache.get(a)
    if hit is None:
        hit = _remember(_atom_cache, a, _canonical_atom(a))
    return hit


def _canonical_atom(a: Atom) -> Formula:
    d = a.lhs - a.rhs
    if not d.coeffs:
        k = d.const
        if a.rel is Rel.EQ:
            return TRUE if k == 0 else FALSE
        if a.rel is Rel.LT:
            return TRUE if k < 0 else FALSE
        if a.rel is Rel.LE:
            return TRUE if k <= 0 else FALSE
        return TRUE if k.numerator % a.modulus == 0 else FALSE
    is_int = d.coeffs[0][0].sort.is_int
    if a.rel is Rel.MOD:
        n = a.modulus
        coeffs = [(v, int(c) % n) for v, c in d.coeffs]
        coeffs = [(v, c) for v, c in coeffs if c]
        k = int(-d.const) % n
        if not coeffs:
            return TRUE if k == 0 else FALSE
        g = 0
        for _, c in coeffs:
            g = math.gcd(g, c)
        g = math.gcd(g, n)
        if k % g:
            return FALSE
        n //= g
        if n == 1:
            return TRUE
        coeffs = [(v, (c // g) % n) for v, c in coeffs]
        # symmetric residues so that u ≡ v prints as `u % 7 = v % 7`
        coeffs = [(v, c - n if 2 * c > n else c) for v, c in coeffs if c]
        k = (k // g) % n
        if coeffs and coeffs[0][1] < 0:
            coeffs = [(v, -c) for v, c in coeffs]
            coeffs = [(v, c - n if 2 * c > n else c + n if 2 * c <= -n else c) for v, c in coeffs]
            k = (-k) % n
        if not coeffs:
            return TRUE if k == 0 else FALSE
        return Atom(Rel.MOD, LinExpr(coeffs), LinExpr((), k), n)
    # clear denominators
    den = 1
    for _, c in d.coeffs:
        den = _lcm(den, c.denominator)
    den = _lcm(den, d.const.denominator)
    d = d.scale(den)
    g = 0
    for _, c in d.coeffs:
        g = math.gcd(g, int(c))
    rel = a.rel
    k = -d.const
    if is_int:
        if rel is Rel.LT:
            rel, k = Rel.LE, k - 1
        if rel is Rel.EQ and k % g:
            return FALSE
        k = Fraction(math.floor(k / g))
        lhs = LinExpr((v, c / g) for v, c in d.coeffs)
    else:
        g = math.gcd(g, int(k)) if k else g
        lhs = LinExpr((v, c / g) for v, c in d.coeffs)
        k = k / g
    if rel is Rel.EQ and lhs.coeffs[0][1] < 0:
        lhs, k = -lhs, -k
    return Atom(rel, lhs, LinExpr((), k))


def _negate_literal(lit: Formula) -> Formula:
    """Negation of a canonical literal, again canonical."""
    if isinstance(lit, Not):
        return lit.arg
    if isinstance(lit, Atom):
        if lit.rel is Rel.LT:
            return canonical_atom(Atom(Rel.LE, lit.rhs, lit.lhs))
        if lit.rel is Rel.LE:
            return canonical_atom(Atom(Rel.LT, lit.rhs, lit.lhs))
        return Not(lit)
    return neg(lit)


def _nnf(f: Formula, positive: bool = True) -> Formula:
    if isinstance(f, _Const):
        return f if positive else neg(f)
    if isinstance(f, Atom):
        c = canonical_atom(f)
        if positive or isinstance(c, _Const):
            return c if positive else neg(c)
        return _negate_literal(c)
    if isinstance(f, Not):
        return _nnf(f.arg, not positive)
    if isinstance(f, And):
        parts = [_nnf(a, positive) for a in f.args]
        return And(parts) if positive else Or(parts)
    if isinstance(f, Or):
        parts = [_nnf(a, positive) for a in f.args]
        return Or(parts) if positive else And(parts)
    if isinstance(f, Exists):
        body = Exists(f.vars, _nnf(f.body))
        return body if positive else Not(body)
    raise TypeError(f"not a formula: {f!r}")


def _flatten(cls, args: Iterable[Formula]) -> list[Formula]:
    out: list[Formula] = []
    for a in args:
        if isinstance(a, cls):
            out.extend(a.args)
        else:
            out.append(a)
    return out


def _literals(f: Formula) -> frozenset[Formula]:
    return frozenset(f.args) if isinstance(f, And) else frozenset((f,))


def _clause(f: Formula) -> frozenset[Formula]:
    return frozenset(f.args) if isinstance(f, Or) else frozenset((f,))


def _is_bound(a: Formula) -> bool:
    return (
        isinstance(a, Atom)
        and a.rel in (Rel.LT, Rel.LE)
        and a.rhs.is_constant
        and a.lhs.const == 0
        and bool(a.lhs.coeffs)
    )


def _merge_bounds(cls, items: list[Formula]) -> list[Formula] | None:
    """Keep one bound per linear form; ``None`` signals the absorbing element.

    In a conjunction the tightest bound survives and a lower bound above an
    upper bound collapses to FALSE; in a disjunction the loosest survives and
    bounds covering the whole line collapse to TRUE.
    """
    groups: dict[LinExpr, list[Atom]] = {}
    out: list[Formula] = []
    for a in items:
        if _is_bound(a):
            groups.setdefault(a.lhs, []).append(a)
        else:
            out.append(a)
    if not groups:
        return items
    conj_mode = cls is And
    best: dict[LinExpr, Atom] = {}
    for lhs, bs in groups.items():
        if conj_mode:
            best[lhs] = min(bs, key=lambda a: (a.rhs.const, a.rel is Rel.LE))
        else:
            best[lhs] = max(bs, key=lambda a: (a.rhs.const, a.rel is Rel.LE))
    for lhs, up in best.items():
        low = best.get(-lhs)
        if low is None:
            continue
        # up: lhs ⋈ u ; low: -lhs ⋈ -l, i.e. lhs ⋈ l from below
        u, l = up.rhs.const, -low.rhs.const
        su, sl = up.rel is Rel.LT, low.rel is Rel.LT
        is_int = lhs.coeffs[0][0].sort.is_int
        if conj_mode:
            if l > u or (l == u and (su or sl)):
                return None
        else:
            if is_int and l <= u + 1:
                return None
            if l < u or (l == u and not (su and sl)):
                return None
    out.extend(best.values())
    return out


def _simplify_nary(cls, args: list[Formula]) -> Formula:
    unit, zero = (TRUE, FALSE) if cls is And else (FALSE, TRUE)
    seen: dict[Formula, None] = {}
    for a in _flatten(cls, args):
        if a == zero:
            return zero
        if a == unit:
            continue
        seen[a] = None
    items = list(seen)
    lits = set(items)
    for a in items:
        if not isinstance(a, _NAry) and _negate_literal(a) in lits:
            return zero
    items = _merge_bounds(cls, items)
    if items is None:
        return zero
    # absorption: a ∨ (a ∧ b) = a, a ∧ (a ∨ b) = a
    if len(items) > 1:
        inner = _literals if cls is Or else _clause
        sets = [(inner(a), a) for a in items]
        sets.sort(key=lambda sa: len(sa[0]))
        kept: list[tuple[frozenset, Formula]] = []
        for s, a in sets:
            if any(k <= s for k, _ in kept):
                continue
            kept.append((s, a))
        items = [a for _, a in kept]
    if not items:
        return unit
    if len(items) == 1:
        return items[0]
    items.sort(key=lambda a: a.sort_key)
    return cls(items)


def _canon(f: Formula) -> Formula:
    if isinstance(f, (_Const, Atom, Not)):
        return f
    if isinstance(f, _NAry):
        return _simplify_nary(type(f), [_canon(a) for a in f.args])
    if isinstance(f, Exists):
        body = _canon(f.body)
        fv = free_vars(body)
        vs = sorted((v for v in set(f.vars) if v in fv), key=lambda v: v.key)
        return Exists(vs, body) if vs else body
    raise TypeError(f"not a formula: {f!r}")


def canonicalize(f: Formula) -> Formula:
    """Deterministic normal form.

    Negation normal form with canonical atoms, flattened and sorted AND/OR
    children, constant folding, duplicate/complement/absorption removal and
    one bound per linear form. Semantics are preserved and no variable is
    introduced.
    """
    hit = _canon_cache.get(f)
    if hit is None:
        hit = _canon(_nnf(f))
        _remember(_canon_cache, f, hit)
        _remember(_canon_cache, hit, hit)
    return hit


# --------------------------------------------------------------------------
# DNF
# --------------------------------------------------------------------------


class BlowupError(RuntimeError):
    """DNF expansion exceeded the configured literal budget."""


def to_dnf(f: Formula, cap: int = 100_000) -> list[frozenset[Formula]]:
    """Disjunctive normal form as a list of literal sets (of canonical literals)."""
    f = canonicalize(f)
    budget = [cap]

    def go(g: Formula) -> list[frozenset[Formula]]:
        if g == TRUE:
            return [frozenset()]
        if g == FALSE:
            return []
        if isinstance(g, Or):
            out = []
            for a in g.args:
                out.extend(go(a))
            return out
        if isinstance(g, And):
            acc: list[frozenset[Formula]] = [frozenset()]
            for a in g.args:
                sub = go(a)
                acc = [x | y for x in acc for y in sub]
                budget[0] -= sum(len(c) for c in acc)
                if budget[0] < 0:
                    raise BlowupError("DNF expansion exceeded the literal cap")
            return acc
        if isinstance(g, Exists):
            raise ConstraintError("DNF of a quantified formula")
        return [frozenset((g,))]

    out = []
    for c in go(f):
        if any(_negate_literal(l) in c for l in c):
            continue
        out.append(c)
    return out


def from_dnf(clauses: Iterable[Iterable[Formula]]) -> Formula:
    return canonicalize(disj_all(conj_all(sorted(c, key=lambda l: l.sort_key)) for c in clauses))
