"""Riemann-sum sequences realized on sampled paths.

A :class:`SeqExpr` is a small AST of the constructions that generate
sequences of step functions: smooth functions of ``B``, symmetric
(Stratonovich-type) Riemann sums against another sequence, signed cubic
variations, constants and linear combinations. Each node has two meanings:
its symbolic class (:meth:`SeqExpr.image`) and its concrete values on a grid
(:func:`realize`).

Text form, e.g. ``circle(x^2, fromfn(x)) - 1/4*cubicvar(fromfn(x))``::

    seq     := sterm (('+' | '-') sterm)*
    sterm   := '-'? sfactor (('*' | '/') sfactor)*
    sfactor := number | NAME | '(' seq ')' | 'fromfn' '(' expr ')'
             | 'circle' '(' expr ',' seq ')' | 'cubicvar' '(' seq ')'
             | 'const' '(' '-'? number ')'

where ``expr`` is a function of ``x`` and ``NAME`` refers to a caller-supplied
binding. Each term holds at most one sequence factor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Mapping

import numpy as np

from . import stratcalc
from .expr import ParseError, Parser, SmoothFn, as_fn, evaluate, to_string
from .fbm import Path, write_csv


def compensated_cumsum(terms) -> np.ndarray:
    """Running sums along the last axis, with a leading zero.

    Left-to-right Neumaier (improved Kahan) summation, vectorized over the
    leading axes.
    """
    terms = np.asarray(terms, dtype=float)
    m = terms.shape[-1]
    out = np.empty(terms.shape[:-1] + (m + 1,))
    out[..., 0] = 0.0
    s = np.zeros(terms.shape[:-1])
    c = np.zeros(terms.shape[:-1])
    for j in range(m):
        x = terms[..., j]
        t = s + x
        c += np.where(np.abs(s) >= np.abs(x), (s - t) + x, (x - t) + s)
        s = t
        out[..., j + 1] = s + c
    return out


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


def _coef(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    if isinstance(c, Real):
        return float(c)
    raise TypeError(f"coefficient must be real, got {c!r}")


def _fmt(c) -> str:
    if isinstance(c, Fraction):
        return str(c)
    return repr(float(c))


class SeqExpr:
    """Base class for sequence constructions."""

    def image(self) -> stratcalc.Element:
        raise NotImplementedError

    def _realize(self, B: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __add__(self, other):
        if isinstance(other, Real):
            other = Const(other)
        if not isinstance(other, SeqExpr):
            return NotImplemented
        return _combine((1, self), (1, other))

    def __radd__(self, other):
        if isinstance(other, Real):
            return Const(other) + self
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, Real):
            other = Const(other)
        if not isinstance(other, SeqExpr):
            return NotImplemented
        return _combine((1, self), (-1, other))

    def __rsub__(self, other):
        if isinstance(other, Real):
            return Const(other) - self
        return NotImplemented

    def __mul__(self, c):
        if not isinstance(c, Real):
            return NotImplemented
        return _combine((c, self))

    __rmul__ = __mul__

    def __neg__(self):
        return _combine((-1, self))


def _combine(*pairs) -> "LinComb":
    coeffs, terms = [], []
    for c, e in pairs:
        c = _coef(c)
        if isinstance(e, LinComb):
            coeffs.extend(c * k for k in e.coeffs)
            terms.extend(e.terms)
        else:
            coeffs.append(c)
            terms.append(e)
    return LinComb(tuple(coeffs), tuple(terms))


@dataclass(frozen=True)
class FromFunction(SeqExpr):
    f: SmoothFn

    def __post_init__(self):
        object.__setattr__(self, "f", as_fn(self.f))

    def image(self):
        return stratcalc.from_function(self.f)

    def _realize(self, B):
        return evaluate(self.f, B)

    def __str__(self):
        return f"fromfn({to_string(self.f)})"


@dataclass(frozen=True)
class Circle(SeqExpr):
    """Symmetric sums ``sum (f(B(t_{j-1})) + f(B(t_j)))/2 * delta_j(inner)``."""

    f: SmoothFn
    inner: SeqExpr

    def __post_init__(self):
        object.__setattr__(self, "f", as_fn(self.f))

    def image(self):
        return stratcalc.circle(self.f, self.inner.image())

    def _realize(self, B):
        fx = evaluate(self.f, B)
        mid = 0.5 * (fx[..., :-1] + fx[..., 1:])
        return compensated_cumsum(mid * np.diff(self.inner._realize(B), axis=-1))

    def __str__(self):
        return f"circle({to_string(self.f)}, {self.inner})"


@dataclass(frozen=True)
class CubicVar(SeqExpr):
    inner: SeqExpr

    def image(self):
        return stratcalc.cubic_variation(self.inner.image())

    def _realize(self, B):
        d = np.diff(self.inner._realize(B), axis=-1)
        # same product order as triple_sum so the two agree bit for bit
        return compensated_cumsum(d * d * d)

    def __str__(self):
        return f"cubicvar({self.inner})"


@dataclass(frozen=True)
class Const(SeqExpr):
    eta: Fraction | float

    def __post_init__(self):
        object.__setattr__(self, "eta", _coef(self.eta))

    def image(self):
        return stratcalc.constant(self.eta)

    def _realize(self, B):
        return np.full(np.shape(B), float(self.eta))

    def __str__(self):
        return f"const({_fmt(self.eta)})"


@dataclass(frozen=True)
class LinComb(SeqExpr):
    coeffs: tuple
    terms: tuple

    def __post_init__(self):
        coeffs = tuple(_coef(c) for c in self.coeffs)
        terms = tuple(self.terms)
        if len(coeffs) != len(terms) or not terms:
            raise ValueError("LinComb needs matching, non-empty coeffs and terms")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "terms", terms)

    def image(self):
        out = stratcalc.constant(0)
        for c, t in zip(self.coeffs, self.terms):
            out = out + c * t.image()
        return out

    def _realize(self, B):
        out = np.zeros(np.shape(B))
        for c, t in zip(self.coeffs, self.terms):
            out = out + float(c) * t._realize(B)
        return out

    def __str__(self):
        parts = []
        for i, (c, t) in enumerate(zip(self.coeffs, self.terms)):
            neg = c < 0
            mag = -c if neg else c
            body = str(t) if mag == 1 else f"{_fmt(mag)}*{t}"
            if i == 0:
                parts.append(f"-{body}" if neg else body)
            else:
                parts.append(f" - {body}" if neg else f" + {body}")
        return "".join(parts)


# ---------------------------------------------------------------------------
# text form
# ---------------------------------------------------------------------------


class _Literal(Const):
    # const(...) written explicitly: a sequence factor, not a coefficient
    pass


class _SeqParser(Parser):
    def __init__(self, text: str, env: Mapping[str, SeqExpr] | None = None):
        super().__init__(text)
        self.env = dict(env or {})

    def seq(self) -> SeqExpr:
        node = self.sterm()
        while self.at("+") or self.at("-"):
            sign = 1 if self.advance().text == "+" else -1
            rhs = self.sterm()
            node = node + rhs if sign > 0 else node - rhs
        return node

    def sterm(self) -> SeqExpr:
        coeff = Fraction(1)
        if self.at("-"):
            self.advance()
            coeff = -coeff
        seq = None
        op = "*"
        while True:
            start = self.tok.pos
            factor = self.sfactor()
            if isinstance(factor, Const) and not isinstance(factor, _Literal):
                coeff = coeff * factor.eta if op == "*" else coeff / factor.eta
            elif op == "/":
                raise ParseError("cannot divide by a sequence", start)
            elif seq is not None:
                raise ParseError("a term may contain only one sequence factor", start)
            else:
                seq = factor
            if self.at("*") or self.at("/"):
                op = self.advance().text
            else:
                break
        if seq is None:
            return Const(coeff)
        return seq if coeff == 1 else coeff * seq

    def sfactor(self) -> SeqExpr:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Const(Fraction(tok.text))
        if self.at("("):
            self.advance()
            node = self.seq()
            self.expect(")")
            return node
        if tok.kind != "ident":
            raise ParseError(f"unexpected {tok.text or 'end of input'!r}", tok.pos)
        self.advance()
        name = tok.text
        if name == "fromfn":
            self.expect("(")
            f = self.expr()
            self.expect(")")
            return FromFunction(f)
        if name == "circle":
            self.expect("(")
            f = self.expr()
            self.expect(",")
            inner = self.seq()
            self.expect(")")
            return Circle(f, inner)
        if name == "cubicvar":
            self.expect("(")
            inner = self.seq()
            self.expect(")")
            return CubicVar(inner)
        if name == "const":
            self.expect("(")
            sign = 1
            if self.at("-"):
                self.advance()
                sign = -1
            num = self.tok
            if num.kind != "number":
                raise ParseError("const() takes a number", num.pos)
            self.advance()
            self.expect(")")
            return _Literal(sign * Fraction(num.text))
        if name in self.env:
            return self.env[name]
        raise ParseError(f"unknown sequence constructor or name {name!r}", tok.pos)


def _unliteral(e: SeqExpr) -> SeqExpr:
    if isinstance(e, _Literal):
        return Const(e.eta)
    if isinstance(e, Circle):
        return Circle(e.f, _unliteral(e.inner))
    if isinstance(e, CubicVar):
        return CubicVar(_unliteral(e.inner))
    if isinstance(e, LinComb):
        return LinComb(e.coeffs, tuple(_unliteral(t) for t in e.terms))
    return e


def parse_seq(text: str, env: Mapping[str, SeqExpr] | None = None) -> SeqExpr:
    """Parse the text form of a sequence expression."""
    p = _SeqParser(text, env)
    node = p.seq()
    p.expect_end()
    return _unliteral(node)


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepFunction:
    """Grid values ``Lambda_n(t_j)``, constant on ``[t_j, t_{j+1})``."""

    n: int
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.values)) / self.n

    def at(self, t: float) -> float:
        k = int(math.floor(t * self.n + 1e-9))
        if k < 0 or k >= len(self.values):
            raise ValueError(f"t = {t} outside the sampled grid")
        return float(self.values[k])

    def to_csv(self, fh=None):
        return write_csv(fh, ("t", "value"), self.times, self.values)

    def __len__(self):
        return len(self.values)


def _grid(path):
    if isinstance(path, Path):
        return path.values, path.n
    return np.asarray(path, dtype=float), None


def _wrap(values, n):
    return values if n is None else StepFunction(n, values)


def realize(e: SeqExpr, path, n: int | None = None):
    """Values of the sequence at level ``n`` on the grid of ``path``.

    ``path`` is a :class:`~weakstrat.fbm.Path` (returns a
    :class:`StepFunction`) or an array of grid values whose last axis is
    time (returns an array of the same shape).
    """
    B, level = _grid(path)
    if n is not None and level is not None and n != level:
        raise ValueError(f"path has level {level}, requested {n}")
    return _wrap(e._realize(B), level)


def triple_sum(f, g, h, path):
    """Running ``sum dX_j dY_j dZ_j`` for ``X, Y, Z = f(B), g(B), h(B)``."""
    B, level = _grid(path)
    dx, dy, dz = (np.diff(evaluate(as_fn(u), B), axis=-1) for u in (f, g, h))
    return _wrap(compensated_cumsum(dx * dy * dz), level)


def nested_circle(f, g, h, path):
    """``circle(f, circle(g, fromfn(h)))`` on ``path``."""
    return realize(Circle(f, Circle(g, FromFunction(h))), path)


def power_sum(path, p: int, absolute: bool = False):
    """Running ``sum |dB|^p`` (``absolute``) or ``sum dB^p``."""
    if p < 1 or int(p) != p:
        raise ValueError("p must be a positive integer")
    B, level = _grid(path)
    d = np.diff(B, axis=-1)
    terms = np.abs(d) ** p if absolute else d ** int(p)
    return _wrap(compensated_cumsum(terms), level)
