"""Expression language for smooth maps between coordinate spaces.

A SmoothMap is a vector of expression ASTs over positional variables
x0..x{m-1}.  The module provides a small DSL parser, a pretty printer
that round-trips, an exact polynomial normal form over the rationals,
numeric evaluation (float64 batches and mpmath high precision), and
symbolic differentiation.  Symbolic differentiation is deliberately
independent of the jet engine so the two can cross-check each other.

Builtins: exp, sin, cos and the smooth step pair bump/dbump, where
bump(y) = s(y)/(s(y)+s(1-y)) with s(t) = exp(-1/t) for t > 0 and 0
otherwise.  Derivatives of dbump close over an internal family
d2bump, d3bump, ... evaluated through truncated Taylor series of s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Expr", "Const", "Var", "Sum", "Product", "Pow", "Quot", "Neg", "Call",
    "SmoothMap", "Box", "CheckConfig", "EqVerdict",
    "ExprError", "ParseError", "DimensionMismatch", "DenominatorNearZero",
    "parse_map", "to_source", "normalize",
    "eval_map", "eval_batch", "eval_exact", "eval_mp",
    "compose", "identity_map", "constant_map", "projection", "concat_maps",
    "juxtapose", "fanout",
    "poly_normalize", "poly_to_expr", "simplify_map",
    "symbolic_derivative", "jacobian_exprs", "jac_eval_batch",
    "equal_maps",
    "bump_coeffs", "bump_coeffs_mp", "bump_value", "bump_batch",
    "BUILTINS", "MAX_BUMP_ORDER",
]

SEAM_GUARD = 1e-8          # below this, exp(-1/t) is treated as exactly 0
DENOM_GUARD = 1e-12        # quotient denominators must stay above this
MAX_BUMP_ORDER = 12        # highest bump derivative the registry serves


class ExprError(Exception):
    """Base class for expression-level failures."""


class ParseError(ExprError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class DimensionMismatch(ExprError):
    pass


class DenominatorNearZero(ExprError):
    pass


# --------------------------------------------------------------------------
# AST nodes


class Expr:
    """Base class; concrete nodes are the frozen dataclasses below."""

    __slots__ = ()

    def __add__(self, other):
        return _sum2(self, _as_expr(other))

    def __radd__(self, other):
        return _sum2(_as_expr(other), self)

    def __sub__(self, other):
        return _sum2(self, neg(_as_expr(other)))

    def __rsub__(self, other):
        return _sum2(_as_expr(other), neg(self))

    def __mul__(self, other):
        return _prod2(self, _as_expr(other))

    def __rmul__(self, other):
        return _prod2(_as_expr(other), self)

    def __truediv__(self, other):
        return quotient(self, _as_expr(other))

    def __rtruediv__(self, other):
        return quotient(_as_expr(other), self)

    def __pow__(self, k: int):
        return power(self, k)

    def __neg__(self):
        return neg(self)


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction

    def __post_init__(self):
        if not isinstance(self.value, Fraction):
            object.__setattr__(self, "value", Fraction(self.value))


@dataclass(frozen=True)
class Var(Expr):
    index: int


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Quot(Expr):
    num: Expr
    den: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr


ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))
MINUS_ONE = Const(Fraction(-1))


def _as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    raise TypeError(f"cannot coerce {x!r} to Expr")


def con(x) -> Const:
    return Const(Fraction(x))


# --------------------------------------------------------------------------
# Smart constructors; these keep ASTs in a light normal form:
# flattened sums/products, folded constants, no Neg nodes (signs are
# absorbed into constants), no constant quotients.


def _iter_sum_terms(e: Expr):
    if isinstance(e, Sum):
        yield from e.terms
    else:
        yield e


def sum_of(terms: Iterable[Expr]) -> Expr:
    flat = []
    const = Fraction(0)
    for t in terms:
        for u in _iter_sum_terms(normalize(t)):
            if isinstance(u, Const):
                const += u.value
            else:
                flat.append(u)
    if const != 0:
        flat.append(Const(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def _iter_prod_factors(e: Expr):
    if isinstance(e, Product):
        yield from e.factors
    else:
        yield e


def product_of(factors: Iterable[Expr]) -> Expr:
    flat = []
    const = Fraction(1)
    for f in factors:
        for u in _iter_prod_factors(normalize(f)):
            if isinstance(u, Const):
                const *= u.value
            else:
                flat.append(u)
    if const == 0:
        return ZERO
    if const != 1:
        flat.insert(0, Const(const))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def _sum2(a: Expr, b: Expr) -> Expr:
    return sum_of([a, b])


def _prod2(a: Expr, b: Expr) -> Expr:
    return product_of([a, b])


def neg(e: Expr) -> Expr:
    return product_of([MINUS_ONE, e])


def power(base: Expr, k: int) -> Expr:
    if k < 0:
        raise ExprError("negative exponent; use quotient")
    b = normalize(base)
    if k == 0:
        return ONE
    if k == 1:
        return b
    if isinstance(b, Const):
        return Const(b.value ** k)
    if isinstance(b, Pow):
        return Pow(b.base, b.exponent * k)
    return Pow(b, k)


def quotient(num: Expr, den: Expr) -> Expr:
    n = normalize(num)
    d = normalize(den)
    if isinstance(d, Const):
        if d.value == 0:
            raise ExprError("division by the zero constant")
        return product_of([Const(1 / d.value), n])
    if isinstance(n, Const) and n.value == 0:
        return ZERO
    return Quot(n, d)


def call(name: str, arg: Expr) -> Expr:
    if name not in BUILTINS:
        raise ExprError(f"unknown builtin '{name}'")
    return Call(name, normalize(arg))


def normalize(e: Expr) -> Expr:
    """Idempotent structural normalization (not polynomial expansion)."""
    if isinstance(e, (Const, Var)):
        return e
    if isinstance(e, Neg):
        return neg(e.arg)
    if isinstance(e, Sum):
        return sum_of(e.terms)
    if isinstance(e, Product):
        return product_of(e.factors)
    if isinstance(e, Pow):
        return power(e.base, e.exponent)
    if isinstance(e, Quot):
        return quotient(e.num, e.den)
    if isinstance(e, Call):
        return call(e.name, e.arg)
    raise TypeError(f"not an Expr: {e!r}")


# --------------------------------------------------------------------------
# Builtin registry: evaluation plus a symbolic derivative rule per name.
# The bump family is closed under differentiation via d{k}bump names.


def _bump_name(order: int) -> str:
    if order == 0:
        return "bump"
    if order == 1:
        return "dbump"
    return f"d{order}bump"


def _bump_order(name: str) -> int:
    if name == "bump":
        return 0
    if name == "dbump":
        return 1
    return int(name[1:-4])


BUILTINS = frozenset(
    {"exp", "sin", "cos"} | {_bump_name(k) for k in range(MAX_BUMP_ORDER + 1)}
)
PUBLIC_BUILTINS = ("exp", "sin", "cos", "bump", "dbump")


def _derivative_of_builtin(name: str, arg: Expr) -> Expr:
    if name == "exp":
        return Call("exp", arg)
    if name == "sin":
        return Call("cos", arg)
    if name == "cos":
        return neg(Call("sin", arg))
    k = _bump_order(name)
    if k + 1 > MAX_BUMP_ORDER:
        raise ExprError("bump derivative order exceeds registry limit")
    return Call(_bump_name(k + 1), arg)


# --------------------------------------------------------------------------
# Bump machinery: truncated Taylor series of s(t) = exp(-1/t).
# Coefficient lists are plain Python lists whose entries are floats,
# mpmath numbers, or numpy arrays (one value per sample point).


def _series_mul(a, b, order):
    out = []
    for n in range(order + 1):
        acc = a[0] * b[n]
        for k in range(1, n + 1):
            acc = acc + a[k] * b[n - k]
        out.append(acc)
    return out


def _series_recip(a, order):
    inv0 = 1.0 / a[0] if not hasattr(a[0], "shape") else 1.0 / a[0]
    out = [inv0]
    for n in range(1, order + 1):
        acc = a[1] * out[n - 1]
        for k in range(2, n + 1):
            acc = acc + a[k] * out[n - k]
        out.append(-inv0 * acc)
    return out


def _s_series_scalar(a, order, exp_fn, zero):
    # Taylor coefficients of t -> s(a + t); all zero at or left of the seam.
    if a < SEAM_GUARD:
        return [zero] * (order + 1)
    h = [-1.0 / a if zero == 0.0 else -1 / a]
    for j in range(1, order + 1):
        h.append(-h[j - 1] / a)
    g = [exp_fn(h[0])]
    for n in range(1, order + 1):
        acc = h[1] * g[n - 1] * 1
        for k in range(2, n + 1):
            acc = acc + k * h[k] * g[n - k]
        g.append(acc / n)
    return g


def bump_coeffs(y: float, order: int):
    """Taylor coefficients of bump at y, as floats, up to `order`."""
    sa = _s_series_scalar(float(y), order, math.exp, 0.0)
    sb = _s_series_scalar(1.0 - float(y), order, math.exp, 0.0)
    sb = [c * ((-1) ** j) for j, c in enumerate(sb)]  # inner derivative of 1-y
    den = [sa[j] + sb[j] for j in range(order + 1)]
    return _series_mul(sa, _series_recip(den, order), order)


def bump_coeffs_mp(y, order: int):
    """Same as bump_coeffs but in mpmath arithmetic (y may be mpf)."""
    import mpmath as mp

    y = mp.mpf(y)
    zero = mp.mpf(0)
    sa = _s_series_scalar(y, order, mp.exp, zero)
    sb = _s_series_scalar(1 - y, order, mp.exp, zero)
    sb = [c * ((-1) ** j) for j, c in enumerate(sb)]
    den = [sa[j] + sb[j] for j in range(order + 1)]
    return _series_mul(sa, _series_recip(den, order), order)


def bump_value(y: float, k: int) -> float:
    """Value of the k-th derivative of bump at y."""
    return bump_coeffs(y, k)[k] * math.factorial(k)


def _s_series_batch(a: np.ndarray, order: int):
    mask = a >= SEAM_GUARD
    safe = np.where(mask, a, 1.0)
    h = [np.where(mask, -1.0 / safe, 0.0)]
    for j in range(1, order + 1):
        h.append(np.where(mask, -h[j - 1] / safe, 0.0))
    g = [np.where(mask, np.exp(h[0]), 0.0)]
    for n in range(1, order + 1):
        acc = h[1] * g[n - 1]
        for k in range(2, n + 1):
            acc = acc + k * h[k] * g[n - k]
        g.append(acc / n)
    return g


def bump_batch(y: np.ndarray, order: int) -> list:
    """Vectorized bump Taylor coefficients; returns a list of arrays."""
    y = np.asarray(y, dtype=float)
    sa = _s_series_batch(y, order)
    sb = _s_series_batch(1.0 - y, order)
    sb = [c * ((-1) ** j) for j, c in enumerate(sb)]
    den = [sa[j] + sb[j] for j in range(order + 1)]
    return _series_mul(sa, _series_recip(den, order), order)


def _bump_deriv_batch(y: np.ndarray, k: int) -> np.ndarray:
    return bump_batch(y, k)[k] * math.factorial(k)


# --------------------------------------------------------------------------
# SmoothMap


@dataclass(frozen=True)
class SmoothMap:
    """A map R^arity -> R^coarity given by one expression per component."""

    arity: int
    components: tuple

    def __post_init__(self):
        comps = tuple(normalize(c) for c in self.components)
        object.__setattr__(self, "components", comps)
        for c in comps:
            bad = [i for i in _free_vars(c) if i >= self.arity or i < 0]
            if bad:
                raise DimensionMismatch(
                    f"variable x{bad[0]} out of range for arity {self.arity}"
                )

    @property
    def coarity(self) -> int:
        return len(self.components)

    def __call__(self, x):
        return eval_map(self, x)


def _free_vars(e: Expr, acc=None) -> set:
    if acc is None:
        acc = set()
    if isinstance(e, Var):
        acc.add(e.index)
    elif isinstance(e, Sum):
        for t in e.terms:
            _free_vars(t, acc)
    elif isinstance(e, Product):
        for f in e.factors:
            _free_vars(f, acc)
    elif isinstance(e, Pow):
        _free_vars(e.base, acc)
    elif isinstance(e, Quot):
        _free_vars(e.num, acc)
        _free_vars(e.den, acc)
    elif isinstance(e, (Neg, Call)):
        _free_vars(e.arg if isinstance(e, Neg) else e.arg, acc)
    return acc


def smooth_map(arity: int, components: Sequence[Expr]) -> SmoothMap:
    return SmoothMap(arity, tuple(components))


# --------------------------------------------------------------------------
# Parser.  Grammar:
#   map    := expr (',' expr)*
#   expr   := term (('+'|'-') term)*
#   term   := factor (('*'|'/') factor)*
#   factor := '-' factor | atom ['^' nonneg-int]
#   atom   := number | ident | '(' expr ')' | builtin '(' expr ')'
# Numbers are decimal (possibly with a fractional part) and rationals
# are written p/q through the division operator, which folds to an
# exact rational constant.  A leading unary minus is accepted.


_TOKEN_CHARS = set("+-*/^(),")


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens = []
        self._run()
        self.index = 0

    def _error(self, msg):
        raise ParseError(msg, self.line, self.col)

    def _advance(self, n):
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _run(self):
        text = self.text
        while self.pos < len(text):
            ch = text[self.pos]
            if ch.isspace():
                self._advance(1)
                continue
            start = (self.line, self.col)
            if ch in _TOKEN_CHARS:
                self.tokens.append(("op", ch, start))
                self._advance(1)
            elif ch.isdigit() or ch == ".":
                j = self.pos
                seen_dot = False
                while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                    seen_dot = seen_dot or text[j] == "."
                    j += 1
                lit = text[self.pos:j]
                if lit == ".":
                    self._error("malformed number")
                self.tokens.append(("num", lit, start))
                self._advance(j - self.pos)
            elif ch.isalpha() or ch == "_":
                j = self.pos
                while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                    j += 1
                self.tokens.append(("ident", text[self.pos:j], start))
                self._advance(j - self.pos)
            else:
                self._error(f"unexpected character {ch!r}")
        self.tokens.append(("end", "", (self.line, self.col)))

    def peek(self):
        return self.tokens[self.index]

    def next(self):
        tok = self.tokens[self.index]
        if tok[0] != "end":
            self.index += 1
        return tok


class _Parser:
    def __init__(self, text: str, arity: int, names: Sequence[str] | None):
        self.lex = _Lexer(text)
        self.arity = arity
        self.names = {n: i for i, n in enumerate(names)} if names else {}

    def _error(self, msg, tok):
        raise ParseError(msg, tok[2][0], tok[2][1])

    def parse_components(self):
        comps = [self.parse_expr()]
        while self.lex.peek()[1] == ",":
            self.lex.next()
            comps.append(self.parse_expr())
        tok = self.lex.peek()
        if tok[0] != "end":
            self._error(f"unexpected token {tok[1]!r}", tok)
        return comps

    def parse_expr(self):
        terms = [self.parse_term()]
        while self.lex.peek()[1] in ("+", "-"):
            op = self.lex.next()[1]
            t = self.parse_term()
            terms.append(t if op == "+" else Neg(t))
        return sum_of(terms) if len(terms) > 1 else terms[0]

    def parse_term(self):
        acc = self.parse_factor()
        while self.lex.peek()[1] in ("*", "/"):
            op = self.lex.next()[1]
            rhs = self.parse_factor()
            acc = product_of([acc, rhs]) if op == "*" else quotient(acc, rhs)
        return acc

    def parse_factor(self):
        tok = self.lex.peek()
        if tok[1] == "-":
            self.lex.next()
            return neg(self.parse_factor())
        atom = self.parse_atom()
        if self.lex.peek()[1] == "^":
            self.lex.next()
            etok = self.lex.next()
            if etok[0] != "num" or "." in etok[1]:
                self._error("exponent must be a nonnegative integer", etok)
            return power(atom, int(etok[1]))
        return atom

    def parse_atom(self):
        tok = self.lex.next()
        kind, text, _ = tok
        if kind == "num":
            return Const(Fraction(text))
        if kind == "ident":
            if self.lex.peek()[1] == "(":
                if text not in BUILTINS:
                    self._error(f"unknown builtin '{text}'", tok)
                self.lex.next()
                inner = self.parse_expr()
                close = self.lex.next()
                if close[1] != ")":
                    self._error("expected ')'", close)
                return call(text, inner)
            return self._variable(tok)
        if text == "(":
            inner = self.parse_expr()
            close = self.lex.next()
            if close[1] != ")":
                self._error("expected ')'", close)
            return inner
        if kind == "end":
            self._error("unexpected end of input", tok)
        self._error(f"unexpected token {text!r}", tok)

    def _variable(self, tok):
        name = tok[1]
        if name in self.names:
            idx = self.names[name]
        elif name.startswith("x") and name[1:].isdigit():
            idx = int(name[1:])
        else:
            self._error(f"unbound variable '{name}'", tok)
        if idx >= self.arity:
            self._error(
                f"variable '{name}' exceeds declared arity {self.arity}", tok
            )
        return Var(idx)


def parse_map(text: str, arity: int, names: Sequence[str] | None = None) -> SmoothMap:
    """Parse DSL source into a SmoothMap; components separated by commas."""
    comps = _Parser(text, arity, names).parse_components()
    return SmoothMap(arity, tuple(comps))


# --------------------------------------------------------------------------
# Printer


def _fmt_const(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return f"{c.numerator}/{c.denominator}"


def _print(e: Expr, prec: int) -> str:
    # precedence: 0 sum, 1 product, 2 unary minus, 3 power base, 4 atom
    if isinstance(e, Const):
        s = _fmt_const(abs(e.value))
        if e.value < 0:
            return _wrap(f"-{s}", 2, prec)
        if e.value.denominator != 1:
            return _wrap(s, 1, prec)
        return s
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Sum):
        parts = [_print(e.terms[0], 0)]
        for t in e.terms[1:]:
            sgn, body = _split_sign(t)
            parts.append((" - " if sgn < 0 else " + ") + _print(body, 1))
        return _wrap("".join(parts), 0, prec)
    if isinstance(e, Product):
        sgn, factors = 1, list(e.factors)
        if isinstance(factors[0], Const) and factors[0].value < 0:
            sgn = -1
            c = Const(-factors[0].value)
            factors = ([] if c.value == 1 else [c]) + factors[1:]
        if not factors:
            body = "1"
        else:
            body = "*".join(_print(f, 2) for f in factors)
        if sgn < 0:
            return _wrap("-" + body, 2, prec)
        return _wrap(body, 1, prec)
    if isinstance(e, Pow):
        return _wrap(f"{_print(e.base, 4)}^{e.exponent}", 3, prec)
    if isinstance(e, Quot):
        return _wrap(f"{_print(e.num, 2)}/{_print(e.den, 4)}", 1, prec)
    if isinstance(e, Neg):
        return _wrap("-" + _print(e.arg, 2), 2, prec)
    if isinstance(e, Call):
        return f"{e.name}({_print(e.arg, 0)})"
    raise TypeError(f"not an Expr: {e!r}")


def _wrap(s: str, level: int, prec: int) -> str:
    return f"({s})" if level < prec else s


def _split_sign(e: Expr):
    if isinstance(e, Const) and e.value < 0:
        return -1, Const(-e.value)
    if isinstance(e, Product):
        head = e.factors[0]
        if isinstance(head, Const) and head.value < 0:
            return -1, product_of([Const(-head.value), *e.factors[1:]])
    return 1, e


def to_source(f: SmoothMap) -> str:
    """Print a SmoothMap back to DSL source (inverse of parse_map)."""
    return ", ".join(_print(c, 0) for c in f.components)


# --------------------------------------------------------------------------
# Evaluation


def _check_point(f: SmoothMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (f.arity,):
        raise DimensionMismatch(
            f"point of shape {x.shape} fed to map of arity {f.arity}"
        )
    return x


def _eval_array(e: Expr, cols: list) -> np.ndarray:
    if isinstance(e, Const):
        return np.full_like(cols[0] if cols else np.zeros(1), float(e.value))
    if isinstance(e, Var):
        return cols[e.index]
    if isinstance(e, Sum):
        acc = _eval_array(e.terms[0], cols)
        for t in e.terms[1:]:
            acc = acc + _eval_array(t, cols)
        return acc
    if isinstance(e, Product):
        acc = _eval_array(e.factors[0], cols)
        for t in e.factors[1:]:
            acc = acc * _eval_array(t, cols)
        return acc
    if isinstance(e, Pow):
        return _eval_array(e.base, cols) ** e.exponent
    if isinstance(e, Quot):
        den = _eval_array(e.den, cols)
        if np.any(np.abs(den) < DENOM_GUARD):
            raise DenominatorNearZero(f"denominator near zero in {_print(e, 0)}")
        return _eval_array(e.num, cols) / den
    if isinstance(e, Neg):
        return -_eval_array(e.arg, cols)
    if isinstance(e, Call):
        arg = _eval_array(e.arg, cols)
        if e.name == "exp":
            return np.exp(arg)
        if e.name == "sin":
            return np.sin(arg)
        if e.name == "cos":
            return np.cos(arg)
        return _bump_deriv_batch(arg, _bump_order(e.name))
    raise TypeError(f"not an Expr: {e!r}")


def eval_batch(f: SmoothMap, X) -> np.ndarray:
    """Evaluate f at a batch of points, shape (n, arity) -> (n, coarity)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != f.arity:
        raise DimensionMismatch(
            f"batch of shape {X.shape} fed to map of arity {f.arity}"
        )
    cols = [X[:, i] for i in range(f.arity)]
    if not cols:
        cols = [np.zeros(X.shape[0])]
    out = np.empty((X.shape[0], f.coarity))
    for j, c in enumerate(f.components):
        out[:, j] = _eval_array(c, cols)
    return out


def eval_map(f: SmoothMap, x) -> np.ndarray:
    """Evaluate f at a single point."""
    x = _check_point(f, x)
    return eval_batch(f, x[None, :])[0]


def eval_exact(f: SmoothMap, x: Sequence[Fraction]) -> list:
    """Exact rational evaluation; rejects builtins and quotients."""

    def go(e: Expr) -> Fraction:
        if isinstance(e, Const):
            return e.value
        if isinstance(e, Var):
            return Fraction(x[e.index])
        if isinstance(e, Sum):
            return sum((go(t) for t in e.terms), Fraction(0))
        if isinstance(e, Product):
            acc = Fraction(1)
            for t in e.factors:
                acc *= go(t)
            return acc
        if isinstance(e, Pow):
            return go(e.base) ** e.exponent
        if isinstance(e, Neg):
            return -go(e.arg)
        raise ExprError("eval_exact requires a polynomial expression")

    if len(x) != f.arity:
        raise DimensionMismatch("point length does not match arity")
    return [go(c) for c in f.components]


def eval_mp(f: SmoothMap, x, dps: int = 60) -> list:
    """High precision evaluation via mpmath; returns a list of mpf."""
    import mpmath as mp

    with mp.workdps(dps):
        vals = [mp.mpf(float(v)) for v in x]

        def go(e: Expr):
            if isinstance(e, Const):
                return mp.mpf(e.value.numerator) / e.value.denominator
            if isinstance(e, Var):
                return vals[e.index]
            if isinstance(e, Sum):
                acc = mp.mpf(0)
                for t in e.terms:
                    acc += go(t)
                return acc
            if isinstance(e, Product):
                acc = mp.mpf(1)
                for t in e.factors:
                    acc *= go(t)
                return acc
            if isinstance(e, Pow):
                return go(e.base) ** e.exponent
            if isinstance(e, Quot):
                den = go(e.den)
                if abs(den) < DENOM_GUARD:
                    raise DenominatorNearZero("denominator near zero")
                return go(e.num) / den
            if isinstance(e, Neg):
                return -go(e.arg)
            if isinstance(e, Call):
                a = go(e.arg)
                if e.name == "exp":
                    return mp.exp(a)
                if e.name == "sin":
                    return mp.sin(a)
                if e.name == "cos":
                    return mp.cos(a)
                k = _bump_order(e.name)
                return bump_coeffs_mp(a, k)[k] * mp.factorial(k)
            raise TypeError(f"not an Expr: {e!r}")

        return [go(c) for c in f.components]


# --------------------------------------------------------------------------
# Composition and combinators


def _substitute(e: Expr, repl: Sequence[Expr]) -> Expr:
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return repl[e.index]
    if isinstance(e, Sum):
        return sum_of([_substitute(t, repl) for t in e.terms])
    if isinstance(e, Product):
        return product_of([_substitute(t, repl) for t in e.factors])
    if isinstance(e, Pow):
        return power(_substitute(e.base, repl), e.exponent)
    if isinstance(e, Quot):
        return quotient(_substitute(e.num, repl), _substitute(e.den, repl))
    if isinstance(e, Neg):
        return neg(_substitute(e.arg, repl))
    if isinstance(e, Call):
        return call(e.name, _substitute(e.arg, repl))
    raise TypeError(f"not an Expr: {e!r}")


def substitute_vars(e: Expr, mapping: dict) -> Expr:
    """Replace Var(i) by mapping[i] where present, leaving others alone."""
    if isinstance(e, Const):
        return e
    if isinstance(e, Var):
        return mapping.get(e.index, e)
    if isinstance(e, Sum):
        return sum_of([substitute_vars(t, mapping) for t in e.terms])
    if isinstance(e, Product):
        return product_of([substitute_vars(t, mapping) for t in e.factors])
    if isinstance(e, Pow):
        return power(substitute_vars(e.base, mapping), e.exponent)
    if isinstance(e, Quot):
        return quotient(substitute_vars(e.num, mapping),
                        substitute_vars(e.den, mapping))
    if isinstance(e, Neg):
        return neg(substitute_vars(e.arg, mapping))
    if isinstance(e, Call):
        return call(e.name, substitute_vars(e.arg, mapping))
    raise TypeError(f"not an Expr: {e!r}")


def compose(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """f after g: eval(compose(f, g), x) = eval(f, eval(g, x))."""
    if g.coarity != f.arity:
        raise DimensionMismatch(
            f"compose: inner coarity {g.coarity} != outer arity {f.arity}"
        )
    comps = tuple(_substitute(c, g.components) for c in f.components)
    return SmoothMap(g.arity, comps)


def identity_map(n: int) -> SmoothMap:
    return SmoothMap(n, tuple(Var(i) for i in range(n)))


def constant_map(arity: int, values: Sequence) -> SmoothMap:
    return SmoothMap(arity, tuple(con(v) for v in values))


def projection(arity: int, indices: Sequence[int]) -> SmoothMap:
    """Select (and reorder) input coordinates."""
    return SmoothMap(arity, tuple(Var(i) for i in indices))


def concat_maps(*maps: SmoothMap) -> SmoothMap:
    """Stack outputs of maps sharing one domain."""
    arity = maps[0].arity
    comps = []
    for m in maps:
        if m.arity != arity:
            raise DimensionMismatch("concat_maps requires equal arities")
        comps.extend(m.components)
    return SmoothMap(arity, tuple(comps))


def juxtapose(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """(f x g)(x, y) = (f(x), g(y)) on disjoint inputs."""
    shift = [Var(i + f.arity) for i in range(g.arity)]
    comps = tuple(f.components) + tuple(
        _substitute(c, shift) for c in g.components
    )
    return SmoothMap(f.arity + g.arity, comps)


def fanout(f: SmoothMap, g: SmoothMap) -> SmoothMap:
    """x -> (f(x), g(x)) on a shared input."""
    if f.arity != g.arity:
        raise DimensionMismatch("fanout requires equal arities")
    return SmoothMap(f.arity, tuple(f.components) + tuple(g.components))


# --------------------------------------------------------------------------
# Polynomial normal form: sparse exponent-tuple -> Fraction, graded lex.


def _poly_of(e: Expr, arity: int):
    if isinstance(e, Const):
        return {} if e.value == 0 else {(0,) * arity: e.value}
    if isinstance(e, Var):
        key = tuple(1 if i == e.index else 0 for i in range(arity))
        return {key: Fraction(1)}
    if isinstance(e, Sum):
        acc = {}
        for t in e.terms:
            p = _poly_of(t, arity)
            if p is None:
                return None
            for k, v in p.items():
                nv = acc.get(k, Fraction(0)) + v
                if nv == 0:
                    acc.pop(k, None)
                else:
                    acc[k] = nv
        return acc
    if isinstance(e, Product):
        acc = {(0,) * arity: Fraction(1)}
        for t in e.factors:
            p = _poly_of(t, arity)
            if p is None:
                return None
            acc = _poly_mul(acc, p)
        return acc
    if isinstance(e, Pow):
        base = _poly_of(e.base, arity)
        if base is None:
            return None
        acc = {(0,) * arity: Fraction(1)}
        for _ in range(e.exponent):
            acc = _poly_mul(acc, base)
        return acc
    if isinstance(e, Neg):
        p = _poly_of(e.arg, arity)
        if p is None:
            return None
        return {k: -v for k, v in p.items()}
    return None


def _poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            nv = out.get(k, Fraction(0)) + va * vb
            if nv == 0:
                out.pop(k, None)
            else:
                out[k] = nv
    return out


def _grlex_key(mono: tuple):
    return (sum(mono), tuple(-m for m in mono))


def poly_normalize(f: SmoothMap):
    """Canonical sparse polynomial per component, or None if any
    component uses quotients or builtins."""
    out = []
    for c in f.components:
        p = _poly_of(c, f.arity)
        if p is None:
            return None
        out.append(dict(sorted(p.items(), key=lambda kv: _grlex_key(kv[0]))))
    return out


def poly_to_expr(p: dict, arity: int) -> Expr:
    terms = []
    for mono, coeff in sorted(p.items(), key=lambda kv: _grlex_key(kv[0])):
        factors = [Const(coeff)]
        for i, m in enumerate(mono):
            if m:
                factors.append(power(Var(i), m))
        terms.append(product_of(factors))
    return sum_of(terms)


def simplify_map(f: SmoothMap) -> SmoothMap:
    """Rebuild polynomial components from canonical form; leave others
    structurally normalized.  Controls swell in iterated tangent maps."""
    comps = []
    for c in f.components:
        p = _poly_of(c, f.arity)
        comps.append(poly_to_expr(p, f.arity) if p is not None else c)
    return SmoothMap(f.arity, tuple(comps))


# --------------------------------------------------------------------------
# Symbolic differentiation


def symbolic_derivative(f: SmoothMap, var: int) -> SmoothMap:
    if not (0 <= var < f.arity):
        raise DimensionMismatch(f"no variable x{var} in map of arity {f.arity}")
    return SmoothMap(f.arity, tuple(_ddx(c, var) for c in f.components))


def _ddx(e: Expr, var: int) -> Expr:
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.index == var else ZERO
    if isinstance(e, Sum):
        return sum_of([_ddx(t, var) for t in e.terms])
    if isinstance(e, Product):
        terms = []
        for i, fa in enumerate(e.factors):
            d = _ddx(fa, var)
            if isinstance(d, Const) and d.value == 0:
                continue
            terms.append(product_of([*e.factors[:i], d, *e.factors[i + 1:]]))
        return sum_of(terms)
    if isinstance(e, Pow):
        d = _ddx(e.base, var)
        return product_of([con(e.exponent), power(e.base, e.exponent - 1), d])
    if isinstance(e, Quot):
        dn, dd = _ddx(e.num, var), _ddx(e.den, var)
        num = sum_of([product_of([dn, e.den]), neg(product_of([e.num, dd]))])
        return quotient(num, power(e.den, 2))
    if isinstance(e, Neg):
        return neg(_ddx(e.arg, var))
    if isinstance(e, Call):
        outer = _derivative_of_builtin(e.name, e.arg)
        return product_of([outer, _ddx(e.arg, var)])
    raise TypeError(f"not an Expr: {e!r}")


def symbolic_derivative_expr(e: Expr, var: int) -> Expr:
    """Partial derivative of a single expression."""
    return _ddx(e, var)


def jacobian_exprs(f: SmoothMap) -> list:
    """Matrix of partial derivative ASTs, coarity x arity."""
    cols = [symbolic_derivative(f, j) for j in range(f.arity)]
    return [
        [cols[j].components[i] for j in range(f.arity)]
        for i in range(f.coarity)
    ]


_JAC_CACHE: dict = {}


def _jac_rows_cached(f: SmoothMap):
    """Derivative ASTs are pure functions of the map; keep them around so
    repeated Jacobian evaluation does not re-differentiate."""
    entry = _JAC_CACHE.get(id(f))
    if entry is not None and entry[0] is f:
        return entry[1]
    rows = jacobian_exprs(f)
    if len(_JAC_CACHE) > 512:
        _JAC_CACHE.clear()
    _JAC_CACHE[id(f)] = (f, rows)
    return rows


def jac_eval_batch(f: SmoothMap, X) -> np.ndarray:
    """Jacobians at a batch of points, shape (n, coarity, arity)."""
    X = np.asarray(X, dtype=float)
    cols = [X[:, i] for i in range(f.arity)]
    if not cols:
        cols = [np.zeros(X.shape[0])]
    J = np.empty((X.shape[0], f.coarity, f.arity))
    rows = _jac_rows_cached(f)
    for i in range(f.coarity):
        for j in range(f.arity):
            J[:, i, j] = _eval_array(rows[i][j], cols)
    return J


# --------------------------------------------------------------------------
# Boxes, sampler configuration, map equality


@dataclass(frozen=True)
class Box:
    """Axis-aligned sampling domain with rational endpoints."""

    intervals: tuple

    def __post_init__(self):
        ivs = tuple(
            (Fraction(lo), Fraction(hi)) for lo, hi in self.intervals
        )
        for lo, hi in ivs:
            if lo > hi:
                raise ExprError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "intervals", ivs)

    @property
    def dim(self) -> int:
        return len(self.intervals)

    def lo(self) -> np.ndarray:
        return np.array([float(a) for a, _ in self.intervals])

    def hi(self) -> np.ndarray:
        return np.array([float(b) for _, b in self.intervals])

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        lo, hi = self.lo(), self.hi()
        return lo + (hi - lo) * rng.random((count, self.dim))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo(), self.hi())

    def contains(self, x, slack: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(
            np.all(x >= self.lo() - slack) and np.all(x <= self.hi() + slack)
        )


def cube(dim: int, lo=-2, hi=2) -> Box:
    return Box(tuple((lo, hi) for _ in range(dim)))


@dataclass(frozen=True)
class CheckConfig:
    """Sampling configuration shared by all checkers."""

    count: int = 200
    tol: float = 1e-9
    seed: int = 42
    t_depth: int = 2

    def rng(self, tag: str) -> np.random.Generator:
        digest = sum(ord(c) * 31 ** i for i, c in enumerate(tag)) % (2 ** 31)
        return np.random.default_rng([self.seed, digest])

    def with_count(self, count: int) -> "CheckConfig":
        return CheckConfig(count, self.tol, self.seed, self.t_depth)


DEFAULT_CONFIG = CheckConfig()


@dataclass(frozen=True)
class EqVerdict:
    """Outcome of comparing two maps: exact proof, a refutation with a
    witness, or numeric evidence only."""

    kind: str                      # "equal" | "not-equal" | "unknown"
    witness: tuple | None = None   # (point, lhs value, rhs value)
    max_residual: float = 0.0
    reason: str = ""

    @property
    def is_exact(self) -> bool:
        return self.kind == "equal"

    @property
    def is_numeric_pass(self) -> bool:
        return self.kind == "unknown" and self.reason.startswith("numeric pass")


def _eval_any(f, X: np.ndarray) -> np.ndarray:
    if isinstance(f, SmoothMap):
        return eval_batch(f, X)
    out = np.empty((X.shape[0], f.coarity))
    for i in range(X.shape[0]):
        out[i] = f.eval_point(X[i])
    return out


def equal_maps(f, g, box: Box, cfg: CheckConfig = DEFAULT_CONFIG) -> EqVerdict:
    """Tri-state equality: canonical polynomial comparison when both
    sides are polynomial, otherwise seeded sampling over `box`."""
    if f.arity != g.arity or f.coarity != g.coarity:
        raise DimensionMismatch(
            f"equal_maps: ({f.arity}->{f.coarity}) vs ({g.arity}->{g.coarity})"
        )
    if box.dim != f.arity:
        raise DimensionMismatch("box dimension does not match map arity")
    if isinstance(f, SmoothMap) and isinstance(g, SmoothMap):
        pf, pg = poly_normalize(f), poly_normalize(g)
        if pf is not None and pg is not None:
            if pf == pg:
                return EqVerdict("equal")
            return _sampled_compare(f, g, box, cfg, polynomial_differs=True)
    return _sampled_compare(f, g, box, cfg, polynomial_differs=False)


def _sampled_compare(f, g, box, cfg, polynomial_differs):
    rng = cfg.rng("equal_maps")
    X = box.sample(rng, cfg.count)
    try:
        F, G = _eval_any(f, X), _eval_any(g, X)
    except ExprError as err:
        return EqVerdict("unknown", reason=f"evaluation failed: {err}")
    resid = np.max(np.abs(F - G), axis=1)
    worst = int(np.argmax(resid))
    r = float(resid[worst])
    if r > cfg.tol:
        return EqVerdict(
            "not-equal",
            witness=(X[worst].copy(), F[worst].copy(), G[worst].copy()),
            max_residual=r,
        )
    if polynomial_differs:
        return EqVerdict(
            "unknown", max_residual=r,
            reason="canonical forms differ but residual is below tolerance",
        )
    return EqVerdict(
        "unknown", max_residual=r, reason=f"numeric pass, max residual {r:.3g}"
    )
