"""Smooth functions of one real variable as immutable expression trees.

Supports parsing, printing, symbolic differentiation, composition, vectorized
evaluation, exact polynomial canonical forms over the rationals, and closed-form
antiderivatives for polynomials times ``exp``/``sin``/``cos`` of a linear
argument.

Grammar (whitespace insignificant)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' integer)?
    base   := number | 'x' | ident '(' expr ')' | '(' expr ')'
    ident  := 'sin' | 'cos' | 'exp'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Union

import numpy as np

Number = Union[Fraction, float]

FUNCTIONS = ("sin", "cos", "exp")

_NP_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_MATH_FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp}


class ExprError(ValueError):
    """Base class for expression errors."""


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    pass


class DomainError(ArithmeticError):
    """Raised when evaluation hits a division by zero."""


class NotIntegrableError(ExprError):
    """No closed-form antiderivative within the expression grammar."""


def _num(value) -> Number:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Real):
        return float(value)
    raise TypeError(f"not a real number: {value!r}")


# --------------------------------------------------------------------------
# AST
# --------------------------------------------------------------------------


class SmoothFn:
    """Base class of all expression nodes.

    Nodes are frozen dataclasses; arithmetic operators build new trees with
    light constant folding. Calling a node evaluates it (scalars or arrays).
    """

    __slots__ = ()
    precedence = 5

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        return add(self, as_fn(other))

    def __radd__(self, other):
        return add(as_fn(other), self)

    def __sub__(self, other):
        return sub(self, as_fn(other))

    def __rsub__(self, other):
        return sub(as_fn(other), self)

    def __mul__(self, other):
        return mul(self, as_fn(other))

    def __rmul__(self, other):
        return mul(as_fn(other), self)

    def __truediv__(self, other):
        return div(self, as_fn(other))

    def __rtruediv__(self, other):
        return div(as_fn(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k: int):
        return power(self, k)

    # conveniences ---------------------------------------------------------
    def __call__(self, x):
        return evaluate(self, x)

    def diff(self, k: int = 1) -> "SmoothFn":
        return differentiate(self, k)

    def compose(self, inner: "SmoothFn") -> "SmoothFn":
        return compose(self, inner)

    def __str__(self) -> str:
        return to_string(self)

    def same(self, other) -> bool:
        """Mathematical equality; see :func:`equal`."""
        return equal(self, as_fn(other))


@dataclass(frozen=True, eq=True)
class Const(SmoothFn):
    value: Number

    @property
    def precedence(self):
        v = self.value
        if v < 0:
            return 2
        if isinstance(v, Fraction) and v.denominator != 1:
            return 2
        return 5

    def __repr__(self):
        return f"Const({self.value!s})"


@dataclass(frozen=True, eq=True)
class Var(SmoothFn):
    def __repr__(self):
        return "Var()"


@dataclass(frozen=True, eq=True)
class Add(SmoothFn):
    left: SmoothFn
    right: SmoothFn
    precedence = 1


@dataclass(frozen=True, eq=True)
class Sub(SmoothFn):
    left: SmoothFn
    right: SmoothFn
    precedence = 1


@dataclass(frozen=True, eq=True)
class Mul(SmoothFn):
    left: SmoothFn
    right: SmoothFn
    precedence = 2


@dataclass(frozen=True, eq=True)
class Div(SmoothFn):
    left: SmoothFn
    right: SmoothFn
    precedence = 2


@dataclass(frozen=True, eq=True)
class Neg(SmoothFn):
    operand: SmoothFn
    precedence = 2


@dataclass(frozen=True, eq=True)
class Pow(SmoothFn):
    base: SmoothFn
    exponent: int
    precedence = 4


@dataclass(frozen=True, eq=True)
class Func(SmoothFn):
    name: str
    arg: SmoothFn


X = Var()
ZERO = Const(Fraction(0))
ONE = Const(Fraction(1))


def as_fn(value) -> SmoothFn:
    """Coerce a node, a number or a string into a :class:`SmoothFn`."""
    if isinstance(value, SmoothFn):
        return value
    if isinstance(value, str):
        return parse(value)
    return Const(_num(value))


def _is_const(f: SmoothFn, value=None) -> bool:
    return isinstance(f, Const) and (value is None or f.value == value)


# smart constructors ----------------------------------------------------------


def add(a: SmoothFn, b: SmoothFn) -> SmoothFn:
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0):
        return b
    if _is_const(b, 0):
        return a
    if isinstance(b, Neg):
        return Sub(a, b.operand)
    if _is_const(b) and b.value < 0:
        return Sub(a, Const(-b.value))
    if isinstance(b, Mul) and _is_const(b.left) and b.left.value < 0:
        return Sub(a, mul(Const(-b.left.value), b.right))
    return Add(a, b)


def sub(a: SmoothFn, b: SmoothFn) -> SmoothFn:
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0):
        return a
    if _is_const(a, 0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.operand)
    if _is_const(b) and b.value < 0:
        return Add(a, Const(-b.value))
    if a == b:
        return ZERO
    return Sub(a, b)


def neg(a: SmoothFn) -> SmoothFn:
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def mul(a: SmoothFn, b: SmoothFn) -> SmoothFn:
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0) or _is_const(b, 0):
        return ZERO
    if _is_const(a, 1):
        return b
    if _is_const(b, 1):
        return a
    if _is_const(a, -1):
        return neg(b)
    if _is_const(b, -1):
        return neg(a)
    if _is_const(b):
        a, b = b, a
    if _is_const(a) and isinstance(b, Mul) and _is_const(b.left):
        return mul(Const(a.value * b.left.value), b.right)
    if _is_const(a) and isinstance(b, Neg):
        return mul(Const(-a.value), b.operand)
    return Mul(a, b)


def div(a: SmoothFn, b: SmoothFn) -> SmoothFn:
    if _is_const(b, 0):
        raise DomainError("division by the constant zero")
    if _is_const(a) and _is_const(b):
        va, vb = a.value, b.value
        return Const(va / vb)
    if _is_const(a, 0):
        return ZERO
    if _is_const(b, 1):
        return a
    return Div(a, b)


def power(a: SmoothFn, k: int) -> SmoothFn:
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ExprError("only integer powers are supported")
    k = int(k)
    if k == 0:
        return ONE
    if k == 1:
        return a
    if _is_const(a):
        if a.value == 0 and k < 0:
            raise DomainError("0 raised to a negative power")
        return Const(a.value ** k)
    return Pow(a, k)


def func(name: str, arg: SmoothFn) -> SmoothFn:
    if name not in FUNCTIONS:
        raise ExprError(f"unknown function {name!r}")
    if _is_const(arg):
        if arg.value == 0:
            return ZERO if name == "sin" else ONE
        return Const(_MATH_FUNCS[name](float(arg.value)))
    return Func(name, arg)


def sin(f) -> SmoothFn:
    return func("sin", as_fn(f))


def cos(f) -> SmoothFn:
    return func("cos", as_fn(f))


def exp(f) -> SmoothFn:
    return func("exp", as_fn(f))


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),=]))"
)


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "ident", "op", "end"
    text: str
    pos: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = len(text[pos:]) - len(text[pos:].lstrip()) + pos
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append(Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class Parser:
    """Recursive-descent parser over a token list.

    Subclassed by the sequence-expression parser, which embeds function
    expressions inside its own syntax.
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.advance()

    def expect_end(self):
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.pos)

    # grammar ----------------------------------------------------------------
    def expr(self) -> SmoothFn:
        node = self.term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> SmoothFn:
        node = self.factor()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> SmoothFn:
        if self.at("-"):
            self.advance()
            return Neg(self.factor())
        node = self.base()
        if self.at("^"):
            self.advance()
            sign = 1
            if self.at("-"):
                self.advance()
                sign = -1
            tok = self.tok
            if tok.kind != "number" or not tok.text.isdigit():
                raise ParseError("exponent must be an integer", tok.pos)
            self.advance()
            node = Pow(node, sign * int(tok.text))
        return node

    def base(self) -> SmoothFn:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Const(Fraction(tok.text))
        if tok.kind == "ident":
            if tok.text == "x":
                self.advance()
                return X
            if tok.text in FUNCTIONS:
                self.advance()
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(tok.text, arg)
            raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.pos)
        if self.at("("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ParseError(f"unexpected {found!r}", tok.pos)


def parse(text: str) -> SmoothFn:
    """Parse an expression in ``x``.

    >>> str(parse("x^3/3"))
    'x^3/3'
    """
    p = Parser(text)
    node = p.expr()
    p.expect_end()
    return node


# --------------------------------------------------------------------------
# Polynomial canonical form
# --------------------------------------------------------------------------

Poly = dict  # degree -> coefficient, no zero coefficients


def _poly_add(p: Poly, q: Poly, sign=1) -> Poly:
    out = dict(p)
    for k, c in q.items():
        v = out.get(k, 0) + sign * c
        if v == 0:
            out.pop(k, None)
        else:
            out[k] = v
    return out


def _poly_mul(p: Poly, q: Poly) -> Poly:
    out: Poly = {}
    for i, a in p.items():
        for j, b in q.items():
            v = out.get(i + j, 0) + a * b
            if v == 0:
                out.pop(i + j, None)
            else:
                out[i + j] = v
    return out


def _poly_scale(p: Poly, c) -> Poly:
    if c == 0:
        return {}
    return {k: v * c for k, v in p.items()}


def to_poly(f: SmoothFn) -> Poly | None:
    """Expanded monomial coefficients of ``f`` or ``None`` if not a polynomial."""
    if isinstance(f, Const):
        return {0: f.value} if f.value != 0 else {}
    if isinstance(f, Var):
        return {1: Fraction(1)}
    if isinstance(f, (Add, Sub)):
        p, q = to_poly(f.left), to_poly(f.right)
        if p is None or q is None:
            return None
        return _poly_add(p, q, 1 if isinstance(f, Add) else -1)
    if isinstance(f, Neg):
        p = to_poly(f.operand)
        return None if p is None else _poly_scale(p, -1)
    if isinstance(f, Mul):
        p = to_poly(f.left)
        if p is None:
            return None
        q = to_poly(f.right)
        return None if q is None else _poly_mul(p, q)
    if isinstance(f, Div):
        q = to_poly(f.right)
        if q is None or any(k != 0 for k in q):
            return None
        if not q:
            raise DomainError("division by zero")
        p = to_poly(f.left)
        return None if p is None else _poly_scale(p, 1 / q[0] if isinstance(q[0], float) else Fraction(1) / q[0])
    if isinstance(f, Pow):
        if f.exponent < 0:
            p = to_poly(f.base)
            if p is not None and set(p) == {0}:
                return {0: p[0] ** f.exponent}
            return None
        p = to_poly(f.base)
        if p is None:
            return None
        out: Poly = {0: Fraction(1)}
        for _ in range(f.exponent):
            out = _poly_mul(out, p)
        return out
    if isinstance(f, Func):
        p = to_poly(f.arg)
        if p is not None and set(p) <= {0}:
            c = func(f.name, Const(p.get(0, Fraction(0)))).value
            return {0: c} if c != 0 else {}
        return None
    raise TypeError(f"unknown node {f!r}")


def is_polynomial(f: SmoothFn) -> bool:
    return to_poly(f) is not None


def _monomial(c: Number, k: int) -> SmoothFn:
    xk = X if k == 1 else Pow(X, k)
    if k == 0:
        return Const(c)
    if c == 1:
        return xk
    if isinstance(c, Fraction) and c.denominator != 1:
        num = xk if c.numerator == 1 else Mul(Const(Fraction(c.numerator)), xk)
        return Div(num, Const(Fraction(c.denominator)))
    return Mul(Const(c), xk)


def from_poly(p: Poly) -> SmoothFn:
    """Canonical tree for a coefficient map: descending degree, left-nested sums."""
    if not p:
        return ZERO
    node = None
    for k in sorted(p, reverse=True):
        c = p[k]
        if node is None:
            if k == 0:
                node = Const(c)
            else:
                node = Neg(_monomial(-c, k)) if c < 0 else _monomial(c, k)
        elif c < 0:
            node = Sub(node, _monomial(-c, k))
        else:
            node = Add(node, _monomial(c, k))
    return node


def simplify(f: SmoothFn) -> SmoothFn:
    """Canonicalize polynomial subtrees and fold constants.

    Sums of ``poly * k(a*x + b)`` terms (k in exp/sin/cos) are collected per
    kernel; anything else is simplified structurally.
    """
    p = to_poly(f)
    if p is not None:
        return from_poly(p)
    try:
        return _collect(_expand_terms(f))
    except NotIntegrableError:
        pass
    if isinstance(f, Add):
        return add(simplify(f.left), simplify(f.right))
    if isinstance(f, Sub):
        return sub(simplify(f.left), simplify(f.right))
    if isinstance(f, Neg):
        return neg(simplify(f.operand))
    if isinstance(f, Mul):
        return mul(simplify(f.left), simplify(f.right))
    if isinstance(f, Div):
        return div(simplify(f.left), simplify(f.right))
    if isinstance(f, Pow):
        return power(simplify(f.base), f.exponent)
    if isinstance(f, Func):
        return func(f.name, simplify(f.arg))
    return f


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------


def _fmt_number(v: Number) -> str:
    if isinstance(v, Fraction):
        return str(v)
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _wrap(f: SmoothFn, min_prec: float) -> str:
    s = _to_string(f)
    return f"({s})" if f.precedence < min_prec else s


def _to_string(f: SmoothFn) -> str:
    if isinstance(f, Const):
        return _fmt_number(f.value)
    if isinstance(f, Var):
        return "x"
    if isinstance(f, Add):
        return f"{_wrap(f.left, 1)} + {_wrap(f.right, 1)}"
    if isinstance(f, Sub):
        return f"{_wrap(f.left, 1)} - {_wrap(f.right, 2)}"
    if isinstance(f, Mul):
        right = f"({_to_string(f.right)})" if isinstance(f.right, Neg) else _wrap(f.right, 3)
        return f"{_wrap(f.left, 2)}*{right}"
    if isinstance(f, Div):
        return f"{_wrap(f.left, 2)}/{_wrap(f.right, 3)}"
    if isinstance(f, Neg):
        # -(a*b) and -(a/b) read the same without parentheses
        inner = _wrap(f.operand, 2)
        return f"-({inner})" if inner.startswith("-") else f"-{inner}"
    if isinstance(f, Pow):
        base = _wrap(f.base, 5)
        return f"{base}^{f.exponent}"
    if isinstance(f, Func):
        return f"{f.name}({_to_string(f.arg)})"
    raise TypeError(f"unknown node {f!r}")


def to_string(f: SmoothFn) -> str:
    """Print ``f`` in canonical form, parseable by :func:`parse`."""
    return _to_string(simplify(f))


# --------------------------------------------------------------------------
# Calculus
# --------------------------------------------------------------------------


def _d(f: SmoothFn) -> SmoothFn:
    if isinstance(f, Const):
        return ZERO
    if isinstance(f, Var):
        return ONE
    if isinstance(f, Add):
        return add(_d(f.left), _d(f.right))
    if isinstance(f, Sub):
        return sub(_d(f.left), _d(f.right))
    if isinstance(f, Neg):
        return neg(_d(f.operand))
    if isinstance(f, Mul):
        return add(mul(_d(f.left), f.right), mul(f.left, _d(f.right)))
    if isinstance(f, Div):
        num = sub(mul(_d(f.left), f.right), mul(f.left, _d(f.right)))
        return div(num, power(f.right, 2))
    if isinstance(f, Pow):
        k = f.exponent
        return mul(mul(Const(Fraction(k)), power(f.base, k - 1)), _d(f.base))
    if isinstance(f, Func):
        inner = _d(f.arg)
        if f.name == "sin":
            outer = func("cos", f.arg)
        elif f.name == "cos":
            outer = neg(func("sin", f.arg))
        else:
            outer = f
        return mul(outer, inner)
    raise TypeError(f"unknown node {f!r}")


def differentiate(f: SmoothFn, k: int = 1) -> SmoothFn:
    """k-th derivative of ``f``, simplified after every step."""
    if k < 1:
        raise ValueError("derivative order must be a positive integer")
    for _ in range(k):
        f = simplify(_d(f))
    return f


def compose(outer: SmoothFn, inner: SmoothFn) -> SmoothFn:
    """Substitute ``inner`` for ``x`` in ``outer``."""
    if isinstance(outer, Var):
        return inner
    if isinstance(outer, Const):
        return outer
    if isinstance(outer, Add):
        return add(compose(outer.left, inner), compose(outer.right, inner))
    if isinstance(outer, Sub):
        return sub(compose(outer.left, inner), compose(outer.right, inner))
    if isinstance(outer, Neg):
        return neg(compose(outer.operand, inner))
    if isinstance(outer, Mul):
        return mul(compose(outer.left, inner), compose(outer.right, inner))
    if isinstance(outer, Div):
        return div(compose(outer.left, inner), compose(outer.right, inner))
    if isinstance(outer, Pow):
        return power(compose(outer.base, inner), outer.exponent)
    if isinstance(outer, Func):
        return func(outer.name, compose(outer.arg, inner))
    raise TypeError(f"unknown node {outer!r}")


# --------------------------------------------------------------------------
# Evaluation and equality
# --------------------------------------------------------------------------


def _eval(f: SmoothFn, x):
    if isinstance(f, Const):
        return float(f.value)
    if isinstance(f, Var):
        return x
    if isinstance(f, Add):
        return _eval(f.left, x) + _eval(f.right, x)
    if isinstance(f, Sub):
        return _eval(f.left, x) - _eval(f.right, x)
    if isinstance(f, Neg):
        return -_eval(f.operand, x)
    if isinstance(f, Mul):
        return _eval(f.left, x) * _eval(f.right, x)
    if isinstance(f, Div):
        den = _eval(f.right, x)
        if np.any(np.asarray(den) == 0):
            raise DomainError(f"division by zero in {to_string(f)}")
        return _eval(f.left, x) / den
    if isinstance(f, Pow):
        base = _eval(f.base, x)
        if f.exponent < 0:
            if np.any(np.asarray(base) == 0):
                raise DomainError(f"0 raised to a negative power in {to_string(f)}")
            return 1.0 / base ** (-f.exponent)
        return base ** f.exponent
    if isinstance(f, Func):
        return _NP_FUNCS[f.name](_eval(f.arg, x))
    raise TypeError(f"unknown node {f!r}")


def evaluate(f: SmoothFn, x):
    """Evaluate ``f`` at a real ``x`` or elementwise on an array."""
    scalar = np.ndim(x) == 0
    arr = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        out = _eval(f, arr)
    out = np.broadcast_to(np.asarray(out, dtype=float), arr.shape)
    return float(out) if scalar else np.array(out)


SAMPLE_POINTS = np.linspace(-2.0, 2.0, 64)


def _coeffs_equal(p: Poly, q: Poly) -> bool:
    if set(p) != set(q):
        return False
    for k in p:
        a, b = p[k], q[k]
        if isinstance(a, Fraction) and isinstance(b, Fraction):
            if a != b:
                return False
        elif not math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0):
            return False
    return True


def equal(f: SmoothFn, g: SmoothFn) -> bool:
    """Decide ``f == g`` as functions.

    Polynomials are compared through their expanded coefficients (exactly
    when both are rational). Anything else is compared on a fixed grid of 64
    points in [-2, 2] with relative tolerance 1e-9.
    """
    p, q = to_poly(f), to_poly(g)
    if p is not None and q is not None:
        return _coeffs_equal(p, q)
    try:
        a = evaluate(f, SAMPLE_POINTS)
        b = evaluate(g, SAMPLE_POINTS)
    except DomainError:
        return False
    scale = np.maximum(np.abs(a), np.abs(b))
    return bool(np.all(np.abs(a - b) <= 1e-9 * scale + 1e-12))


# --------------------------------------------------------------------------
# Antiderivatives
# --------------------------------------------------------------------------

# A term is (poly, kernel) with kernel None or (name, a, b) meaning name(a*x + b).


def _linear(f: SmoothFn):
    p = to_poly(f)
    if p is None or any(k > 1 for k in p):
        return None
    return p.get(1, 0), p.get(0, 0)


def _kernel_term(p: Poly, name: str, a, b):
    """``p(x) * name(a x + b)``, folding a constant kernel (``a == 0``) into ``p``."""
    if a != 0:
        return [(p, (name, a, b))]
    c = func(name, Const(b)).value
    return [(_poly_scale(p, c), None)] if c != 0 and p else []


def _terms_mul(s, t):
    out = []
    for p, k1 in s:
        for q, k2 in t:
            pq = _poly_mul(p, q)
            if not pq:
                continue
            if k1 is None or k2 is None:
                out.append((pq, k1 or k2))
                continue
            (n1, a1, b1), (n2, a2, b2) = k1, k2
            if n1 == "exp" and n2 == "exp":
                out.extend(_kernel_term(pq, "exp", a1 + a2, b1 + b2))
            elif n1 != "exp" and n2 != "exp":
                out.extend(_trig_product(pq, k1, k2))
            else:
                raise NotIntegrableError("product of exp and a trigonometric factor")
    return out


def _trig_product(pq, k1, k2):
    (n1, a1, b1), (n2, a2, b2) = k1, k2
    half = _poly_scale(pq, Fraction(1, 2))
    neg_half = _poly_scale(pq, Fraction(-1, 2))
    diff_ = (a1 - a2, b1 - b2)
    summ = (a1 + a2, b1 + b2)
    if n1 == "sin" and n2 == "sin":
        parts = [(half, "cos", diff_), (neg_half, "cos", summ)]
    elif n1 == "cos" and n2 == "cos":
        parts = [(half, "cos", diff_), (half, "cos", summ)]
    elif n1 == "sin":
        parts = [(half, "sin", summ), (half, "sin", diff_)]
    else:
        parts = [(half, "sin", summ), (neg_half, "sin", diff_)]
    out = []
    for coeff, name, (a, b) in parts:
        out.extend(_kernel_term(coeff, name, a, b))
    return out


def _expand_terms(f: SmoothFn):
    p = to_poly(f)
    if p is not None:
        return [(p, None)] if p else []
    if isinstance(f, (Add, Sub)):
        right = _expand_terms(f.right)
        if isinstance(f, Sub):
            right = [(_poly_scale(q, -1), k) for q, k in right]
        return _expand_terms(f.left) + right
    if isinstance(f, Neg):
        return [(_poly_scale(q, -1), k) for q, k in _expand_terms(f.operand)]
    if isinstance(f, Mul):
        return _terms_mul(_expand_terms(f.left), _expand_terms(f.right))
    if isinstance(f, Div):
        q = to_poly(f.right)
        if q is None or set(q) != {0}:
            raise NotIntegrableError(f"cannot integrate quotient {_to_string(f)}")
        c = q[0]
        inv = 1 / c if isinstance(c, float) else Fraction(1) / c
        return [(_poly_scale(p, inv), k) for p, k in _expand_terms(f.left)]
    if isinstance(f, Pow):
        if f.exponent < 0:
            raise NotIntegrableError(f"cannot integrate negative power {_to_string(f)}")
        out = [({0: Fraction(1)}, None)]
        base = _expand_terms(f.base)
        for _ in range(f.exponent):
            out = _terms_mul(out, base)
        return out
    if isinstance(f, Func):
        lin = _linear(f.arg)
        if lin is None:
            raise NotIntegrableError(f"non-linear argument in {_to_string(f)}")
        return _kernel_term({0: Fraction(1)}, f.name, *lin)
    raise TypeError(f"unknown node {f!r}")


def _kernel_key(kernel):
    name, a, b = kernel
    return (name, float(a), float(b))


def _collect(terms) -> SmoothFn:
    groups: dict = {}
    for p, kernel in terms:
        key = None if kernel is None else kernel
        groups[key] = _poly_add(groups.get(key, {}), p)
    node: SmoothFn = ZERO
    poly = groups.pop(None, {})
    for kernel in sorted(groups, key=_kernel_key):
        p = groups[kernel]
        if not p:
            continue
        name, a, b = kernel
        arg = from_poly({1: a, 0: b} if b != 0 else {1: a})
        node = add(node, mul(from_poly(p), func(name, arg)))
    return add(node, from_poly(poly))


def _poly_integral(p: Poly) -> Poly:
    out = {}
    for k, c in p.items():
        out[k + 1] = c / (k + 1) if isinstance(c, float) else Fraction(c) / (k + 1)
    return out


def _poly_deriv(p: Poly) -> Poly:
    return {k - 1: c * k for k, c in p.items() if k > 0}


def _integrate_kernel(p: Poly, name: str, a, b) -> SmoothFn:
    inv_a = 1 / a if isinstance(a, float) else Fraction(1) / a
    arg = from_poly({1: a, 0: b} if b != 0 else {1: a})
    if name == "exp":
        # integral of p e^u = e^u * sum_k (-1)^k p^(k) / a^(k+1)
        acc: Poly = {}
        q, scale = p, inv_a
        while q:
            acc = _poly_add(acc, _poly_scale(q, scale))
            q, scale = _poly_deriv(q), -scale * inv_a
        return mul(from_poly(acc), func("exp", arg))
    # integral of p sin(u) = -p cos(u)/a + integral of p' cos(u)/a, and dually
    s_acc: Poly = {}
    c_acc: Poly = {}
    q, scale, current = p, inv_a, name
    while q:
        if current == "sin":
            c_acc = _poly_add(c_acc, _poly_scale(q, -scale))
            current = "cos"
        else:
            s_acc = _poly_add(s_acc, _poly_scale(q, scale))
            current = "sin"
            scale = -scale
        q = _poly_deriv(q)
        scale = scale * inv_a
    return add(mul(from_poly(s_acc), func("sin", arg)), mul(from_poly(c_acc), func("cos", arg)))


def antiderivative(f: SmoothFn) -> SmoothFn:
    """Antiderivative of ``f`` vanishing at 0.

    Handles polynomials and sums of ``p(x)*k(a*x + b)`` with ``k`` one of
    exp/sin/cos (products of such factors are expanded first). Raises
    :class:`NotIntegrableError` otherwise; no numerical fallback.
    """
    poly_part: Poly = {}
    pieces = []
    for p, kernel in _expand_terms(f):
        if kernel is None:
            poly_part = _poly_add(poly_part, p)
        else:
            pieces.append(_integrate_kernel(p, *kernel))
    F = from_poly(_poly_integral(poly_part))
    for piece in pieces:
        F = add(F, piece)
    F = simplify(F)
    at_zero = compose(F, ZERO)
    if not (isinstance(at_zero, Const) and at_zero.value == 0):
        F = simplify(sub(F, at_zero))
    return F
