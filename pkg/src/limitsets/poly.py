"""Sparse multivariate polynomials with exact rational coefficients.

Polynomials live over an ordered tuple of variable names.  The default
variables are ``x``, ``y`` and ``lam`` (the family parameter); extra symbols
(``alpha``, gluing coordinates) can be introduced for symbolic checks.
Arithmetic is exact (:class:`fractions.Fraction`); float evaluation goes
through :class:`PlanarPoly`, which is a separate, explicitly inexact path.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Union

import numpy as np

DEFAULT_VARS = ("x", "y", "lam")
_BASE_ORDER = {"x": 0, "y": 1, "lam": 2}
_ALIASES = {"λ": "lam", "lambda": "lam", "lam": "lam", "x": "x", "y": "y"}

Number = Union[int, Fraction]

# products larger than this go through the vectorized integer kernel
_FAST_MUL_PAIRS = 20000
_CHUNK_PAIRS = 2_000_000


class PolynomialError(ValueError):
    pass


class ParseError(PolynomialError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


def _var_key(name: str):
    return (_BASE_ORDER.get(name, 3), name)


def _merge_vars(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    if a == b:
        return a
    return tuple(sorted(set(a) | set(b), key=_var_key))


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as a coefficient")


class Polynomial:
    """Immutable sparse polynomial ``{exponent tuple: Fraction}``."""

    __slots__ = ("variables", "terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, ...], Number] | None = None,
                 variables: Iterable[str] = DEFAULT_VARS):
        variables = tuple(variables)
        n = len(variables)
        clean: dict[tuple[int, ...], Fraction] = {}
        for exps, c in (terms or {}).items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != n or any(e < 0 for e in exps):
                raise PolynomialError(f"bad exponent vector {exps} for {variables}")
            c = _as_fraction(c)
            if c:
                clean[exps] = clean.get(exps, Fraction(0)) + c
                if not clean[exps]:
                    del clean[exps]
        self.variables = variables
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, variables: tuple[str, ...]) -> "Polynomial":
        # trusted constructor: terms already canonical (no zeros, Fractions)
        p = cls.__new__(cls)
        p.variables = variables
        p.terms = terms
        p._hash = None
        return p

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, c: Number, variables: Iterable[str] = DEFAULT_VARS) -> "Polynomial":
        variables = tuple(variables)
        return cls({(0,) * len(variables): c}, variables)

    @classmethod
    def var(cls, name: str, variables: Iterable[str] = DEFAULT_VARS) -> "Polynomial":
        name = _ALIASES.get(name, name)
        variables = tuple(variables)
        if name not in variables:
            variables = _merge_vars(variables, (name,))
        exps = tuple(1 if v == name else 0 for v in variables)
        return cls({exps: 1}, variables)

    # -- basic structure ------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def with_variables(self, variables: tuple[str, ...]) -> "Polynomial":
        if variables == self.variables:
            return self
        missing = [v for v in self.variables if v not in variables]
        for v in missing:
            idx = self.variables.index(v)
            if any(e[idx] for e in self.terms):
                raise PolynomialError(f"variable {v!r} is used and cannot be dropped")
        pos = [self.variables.index(v) if v in self.variables else None for v in variables]
        terms = {tuple(e[i] if i is not None else 0 for i in pos): c
                 for e, c in self.terms.items()}
        return Polynomial._raw(terms, variables)

    def used_variables(self) -> tuple[str, ...]:
        used = [False] * len(self.variables)
        for e in self.terms:
            for i, k in enumerate(e):
                if k:
                    used[i] = True
        return tuple(v for v, u in zip(self.variables, used) if u)

    def _coerce(self, other) -> tuple["Polynomial", "Polynomial"]:
        if not isinstance(other, Polynomial):
            other = Polynomial.constant(_as_fraction(other), self.variables)
        vs = _merge_vars(self.variables, other.variables)
        return self.with_variables(vs), other.with_variables(vs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Polynomial):
            try:
                other = Polynomial.constant(_as_fraction(other), self.variables)
            except TypeError:
                return NotImplemented
        a, b = self._coerce(other)
        return a.terms == b.terms

    def __hash__(self) -> int:
        if self._hash is None:
            p = self.with_variables(tuple(sorted(self.used_variables(), key=_var_key)))
            self._hash = hash((p.variables, frozenset(p.terms.items())))
        return self._hash

    # -- ring operations ------------------------------------------------
    def __neg__(self) -> "Polynomial":
        return Polynomial._raw({e: -c for e, c in self.terms.items()}, self.variables)

    def __add__(self, other) -> "Polynomial":
        a, b = self._coerce(other)
        if len(a.terms) < len(b.terms):
            a, b = b, a
        terms = dict(a.terms)
        for e, c in b.terms.items():
            s = terms.get(e)
            if s is None:
                terms[e] = c
            else:
                s = s + c
                if s:
                    terms[e] = s
                else:
                    del terms[e]
        return Polynomial._raw(terms, a.variables)

    __radd__ = __add__

    def __sub__(self, other) -> "Polynomial":
        a, b = self._coerce(other)
        return a + (-b)

    def __rsub__(self, other) -> "Polynomial":
        a, b = self._coerce(other)
        return b + (-a)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = _as_fraction(other)
            if not c:
                return Polynomial._raw({}, self.variables)
            return Polynomial._raw({e: v * c for e, v in self.terms.items()}, self.variables)
        a, b = self._coerce(other)
        if not a.terms or not b.terms:
            return Polynomial._raw({}, a.variables)
        if len(a.terms) * len(b.terms) >= _FAST_MUL_PAIRS:
            terms = _mul_vectorized(a.terms, b.terms, len(a.variables))
            if terms is not None:
                return Polynomial._raw(terms, a.variables)
        return Polynomial._raw(_mul_loop(a.terms, b.terms), a.variables)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.used_variables() or other.is_zero():
                raise PolynomialError("division only by a nonzero constant")
            other = next(iter(other.terms.values()))
        c = _as_fraction(other)
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return self * (1 / c)

    def __pow__(self, k: int) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise PolynomialError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self.variables)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- calculus and substitution --------------------------------------
    def diff(self, var: str) -> "Polynomial":
        var = _ALIASES.get(var, var)
        if var not in self.variables:
            return Polynomial._raw({}, self.variables)
        i = self.variables.index(var)
        terms = {}
        for e, c in self.terms.items():
            k = e[i]
            if k:
                terms[e[:i] + (k - 1,) + e[i + 1:]] = c * k
        return Polynomial._raw(terms, self.variables)

    def substitute(self, var: str, value) -> "Polynomial":
        """Replace ``var`` by a rational number or another polynomial."""
        var = _ALIASES.get(var, var)
        if var not in self.variables:
            return self
        i = self.variables.index(var)
        if not isinstance(value, Polynomial):
            v = _as_fraction(value)
            powers: dict[int, Fraction] = {}
            terms: dict[tuple[int, ...], Fraction] = {}
            for e, c in self.terms.items():
                k = e[i]
                if k not in powers:
                    powers[k] = v ** k
                c = c * powers[k]
                if not c:
                    continue
                key = e[:i] + (0,) + e[i + 1:]
                s = terms.get(key, Fraction(0)) + c
                if s:
                    terms[key] = s
                else:
                    terms.pop(key, None)
            return Polynomial._raw(terms, self.variables)
        # group by power of var, then Horner in the substituted value
        groups: dict[int, dict] = {}
        for e, c in self.terms.items():
            groups.setdefault(e[i], {})[e[:i] + (0,) + e[i + 1:]] = c
        result = Polynomial._raw({}, self.variables)
        for k in range(max(groups), -1, -1):
            result = result * value
            if k in groups:
                result = result + Polynomial._raw(groups[k], self.variables)
        return result

    # -- degrees ----------------------------------------------------------
    def degree(self, variables: Iterable[str] | None = None) -> float:
        if not self.terms:
            return -math.inf
        if variables is None:
            idx = range(len(self.variables))
        else:
            idx = [self.variables.index(_ALIASES.get(v, v)) for v in variables
                   if _ALIASES.get(v, v) in self.variables]
        return max(sum(e[i] for i in idx) for e in self.terms)

    def degree_xy(self) -> float:
        """Total degree in ``x`` and ``y``; every other variable is a parameter."""
        return self.degree(("x", "y"))

    def coefficient(self, **exps: int) -> Fraction:
        key = tuple(exps.get(v, 0) for v in self.variables)
        return self.terms.get(key, Fraction(0))

    # -- evaluation ---------------------------------------------------------
    def evaluate(self, point) -> float:
        """Float evaluation (inexact).

        ``point`` is a mapping from variable name to value, or an
        ``(x, y, lam)`` tuple.
        """
        if not isinstance(point, Mapping):
            point = dict(zip(DEFAULT_VARS, point))
        point = {_ALIASES.get(k, k): v for k, v in point.items()}
        for v in self.used_variables():
            if v not in point:
                raise PolynomialError(f"no value for variable {v!r}")
        lam = float(point.get("lam", 0.0))
        rest = {k: v for k, v in point.items() if k not in ("x", "y", "lam")}
        p = self
        for k, v in rest.items():
            p = p.substitute(k, Fraction(v))
        return float(PlanarPoly.from_polynomial(p, lam=lam)(float(point.get("x", 0.0)),
                                                          float(point.get("y", 0.0))))

    # -- printing -----------------------------------------------------------
    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        # graded lexicographic, highest first
        return sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True)

    def __str__(self) -> str:
        return to_text(self)

    def __repr__(self) -> str:
        return f"Polynomial({to_text(self)!r})"


def _mul_loop(a: dict, b: dict) -> dict:
    out: dict = {}
    get = out.get
    bi = list(b.items())
    for ea, ca in a.items():
        for eb, cb in bi:
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = get(e, 0) + ca * cb
    return {e: c for e, c in out.items() if c}


def _mul_vectorized(a: dict, b: dict, nvars: int) -> dict | None:
    """Exact product through packed int64 monomial keys and integer numerators.

    Returns None when the packing or the coefficient range does not fit in
    int64; the caller then falls back to the plain loop.
    """
    ea = np.array(list(a.keys()), dtype=np.int64).reshape(len(a), nvars)
    eb = np.array(list(b.keys()), dtype=np.int64).reshape(len(b), nvars)
    top = ea.max(axis=0) + eb.max(axis=0)
    bits = [max(1, int(t).bit_length()) for t in top]
    if sum(bits) > 62:
        return None
    shifts = np.cumsum([0] + bits[:-1]).astype(np.int64)

    da = reduce(math.lcm, (c.denominator for c in a.values()), 1)
    db = reduce(math.lcm, (c.denominator for c in b.values()), 1)
    na = [int(c * da) for c in a.values()]
    nb = [int(c * db) for c in b.values()]
    bound = max(map(abs, na)) * max(map(abs, nb)) * min(len(na), len(nb))
    if bound >= 2 ** 62:
        return None
    ka = (ea << shifts).sum(axis=1)
    kb = (eb << shifts).sum(axis=1)
    ca = np.array(na, dtype=np.int64)
    cb = np.array(nb, dtype=np.int64)

    rows = max(1, _CHUNK_PAIRS // len(kb))
    keys_acc, vals_acc = [], []
    for s in range(0, len(ka), rows):
        k = (ka[s:s + rows, None] + kb[None, :]).ravel()
        v = (ca[s:s + rows, None] * cb[None, :]).ravel()
        k, v = _reduce_sorted(k, v)
        keys_acc.append(k)
        vals_acc.append(v)
    k, v = _reduce_sorted(np.concatenate(keys_acc), np.concatenate(vals_acc))
    nz = v != 0
    k, v = k[nz], v[nz]
    masks = [(1 << bt) - 1 for bt in bits]
    cols = [((k >> int(sh)) & m).tolist() for sh, m in zip(shifts, masks)]
    den = da * db
    # coefficients repeat heavily; build one Fraction per distinct value
    uniq, inv = np.unique(v, return_inverse=True)
    fr = [Fraction(int(c), den) for c in uniq.tolist()]
    return {e: fr[i] for e, i in zip(zip(*cols), inv.ravel().tolist())}


def _reduce_sorted(k: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(k)
    k, v = k[order], v[order]
    starts = np.flatnonzero(np.concatenate(([True], k[1:] != k[:-1])))
    return k[starts], np.add.reduceat(v, starts)


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def _monomial_text(exps: tuple[int, ...], variables: tuple[str, ...]) -> str:
    parts = []
    for v, k in zip(variables, exps):
        if k == 1:
            parts.append(v)
        elif k > 1:
            parts.append(f"{v}^{k}")
    return "*".join(parts)


def to_text(p: Polynomial) -> str:
    """Canonical text: graded-lex order, explicit ``*`` and ``^``."""
    if not p.terms:
        return "0"
    out = []
    for i, (e, c) in enumerate(p.sorted_terms()):
        mono = _monomial_text(e, p.variables)
        mag = abs(c)
        if mono:
            body = mono if mag == 1 else f"{mag}*{mono}"
        else:
            body = str(mag)
        if i == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((" - " if c < 0 else " + ") + body)
    return "".join(out)


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_λ][A-Za-z_0-9]*)|(.))")


def _tokenize(expr: str) -> list[tuple[str, str, int]]:
    expr = expr.replace("−", "-").replace("·", "*").replace("**", "^")
    tokens = []
    pos = 0
    while pos < len(expr):
        m = _TOKEN.match(expr, pos)
        if m is None:
            break
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch.isspace():
                pos = m.end()
                continue
            if ch not in "+-*/^()":
                raise ParseError(f"unexpected character {ch!r}", m.start(3))
            tokens.append(("op", ch, m.start(3)))
        pos = m.end()
    tokens.append(("end", "", len(expr)))
    return tokens


class _Parser:
    # expr   := term (('+'|'-') term)*
    # term   := unary (('*'|'/') unary)*
    # unary  := ('-'|'+') unary | power
    # power  := atom ('^' integer)?
    # atom   := number | name | '(' expr ')'

    def __init__(self, expr: str, symbols: Iterable[str]):
        self.tokens = _tokenize(expr)
        self.i = 0
        self.symbols = set(symbols)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            raise ParseError(f"expected {value!r}", pos)

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0)
        p = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return p

    def expr(self) -> Polynomial:
        p = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self) -> Polynomial:
        p = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            q = self.unary()
            if op == "*":
                p = p * q
            else:
                if q.used_variables():
                    raise ParseError("division by a non-constant", pos)
                if q.is_zero():
                    raise ParseError("division by zero", pos)
                p = p / q
        return p

    def unary(self) -> Polynomial:
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            p = self.unary()
            return -p if val == "-" else p
        return self.power()

    def power(self) -> Polynomial:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            kind, val, pos = self.peek()
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer", pos)
            self.take()
            return base ** int(val)
        return base

    def atom(self) -> Polynomial:
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.constant(int(val))
        if kind == "name":
            name = _ALIASES.get(val, val)
            if name in DEFAULT_VARS or name in self.symbols:
                return Polynomial.var(name)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            p = self.expr()
            self.expect(")")
            return p
        if kind == "end":
            raise ParseError("unexpected end of expression", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse(expr: str, symbols: Iterable[str] = ()) -> Polynomial:
    """Parse an arithmetic expression over ``x``, ``y``, ``lam`` (alias ``λ``).

    ``symbols`` admits extra identifiers, e.g. ``("alpha",)``.
    """
    return _Parser(expr, symbols).parse()


def parse_rational(text: str) -> Fraction:
    """Parse ``"3"``, ``"-1/2"`` or a decimal literal into an exact Fraction."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise PolynomialError(f"not a rational number: {text!r}") from exc


def gradient(p: Polynomial) -> tuple[Polynomial, Polynomial]:
    return p.diff("x"), p.diff("y")


# ---------------------------------------------------------------------------
# float evaluation
# ---------------------------------------------------------------------------

class PlanarPoly:
    """Float view of a polynomial in ``x, y`` at a fixed parameter value.

    ``coeffs[i, j]`` multiplies ``x**i * y**j``.  Evaluation is Horner in
    ``y`` then ``x`` (via numpy), so results carry ordinary float64 rounding.
    """

    def __init__(self, coeffs: np.ndarray):
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self._scalar = None

    @classmethod
    def from_polynomial(cls, p: Polynomial, lam=None) -> "PlanarPoly":
        extra = [v for v in p.used_variables() if v not in ("x", "y", "lam")]
        if extra:
            raise PolynomialError(f"cannot evaluate with free symbols {extra}")
        if "lam" in p.used_variables() and lam is None:
            raise PolynomialError("a value for lam is required")
        if "lam" in p.variables and lam is not None:
            # exact substitution keeps the coefficients correctly rounded
            p = p.substitute("lam", Fraction(lam) if not isinstance(lam, Fraction) else lam)
        ix = p.variables.index("x") if "x" in p.variables else None
        iy = p.variables.index("y") if "y" in p.variables else None
        dx = dy = 0
        entries = []
        for e, c in p.terms.items():
            i = e[ix] if ix is not None else 0
            j = e[iy] if iy is not None else 0
            entries.append((i, j, c))
            dx, dy = max(dx, i), max(dy, j)
        exact = [[Fraction(0)] * (dy + 1) for _ in range(dx + 1)]
        for i, j, c in entries:
            exact[i][j] += c
        coeffs = np.array([[float(c) for c in row] for row in exact], dtype=float)
        return cls(coeffs)

    def __call__(self, x, y):
        return np.polynomial.polynomial.polyval2d(x, y, self.coeffs)

    def grid(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Values on the tensor grid, ``out[i, j] = p(xs[i], ys[j])``."""
        return np.polynomial.polynomial.polygrid2d(xs, ys, self.coeffs)

    def diff(self, var: str) -> "PlanarPoly":
        axis = 0 if var == "x" else 1
        c = np.polynomial.polynomial.polyder(self.coeffs, axis=axis)
        return PlanarPoly(c)

    @property
    def scalar(self):
        """Compiled Horner function of two Python floats (fast path for ODEs)."""
        if self._scalar is None:
            self._scalar = _compile_scalar(self.coeffs)
        return self._scalar

    def norm1(self) -> float:
        return float(np.abs(self.coeffs).sum())


def _horner_src(coeffs: Iterable[float], var: str) -> str:
    coeffs = list(coeffs)
    while len(coeffs) > 1 and coeffs[-1] == 0.0:
        coeffs.pop()
    src = repr(float(coeffs[-1]))
    for c in reversed(coeffs[:-1]):
        src = f"({float(c)!r}+{var}*{src})" if c != 0.0 else f"({var}*{src})"
    return src


def _compile_scalar(coeffs: np.ndarray):
    rows = [_horner_src(row, "y") for row in coeffs]
    src = rows[-1]
    for r in reversed(rows[:-1]):
        src = f"({r}+x*{src})"
    code = compile(f"lambda x, y: {src}", "<planar-poly>", "eval")
    return eval(code, {"__builtins__": {}})
