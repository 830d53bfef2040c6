"""Algebra of weak Stratonovich integrals driven by fBm with H = 1/6.

An equivalence class of Riemann-sum sequences is determined by its initial
value ``eta`` and the two coefficient functions ``phi1`` and ``phi3`` that
multiply ``dB`` and ``dB^3`` in its increment expansion around the midpoint
``(B(t_{j-1}) + B(t_j)) / 2``. Everything here manipulates those triples
exactly, so identity checks are algebraic rather than numerical.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real

import numpy as np

from .expr import (
    X,
    ZERO,
    SmoothFn,
    antiderivative,
    as_fn,
    compose,
    differentiate,
    equal,
    from_poly,
    parse,
    simplify,
    to_string,
)

_F = Fraction


def _as_eta(value) -> Fraction | float:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Real):
        return float(value)
    raise TypeError(f"eta must be a real constant, got {value!r}")


def _eta_equal(a, b) -> bool:
    if isinstance(a, Fraction) and isinstance(b, Fraction):
        return a == b
    return math.isclose(float(a), float(b), rel_tol=1e-12, abs_tol=1e-15)


def _eta_json(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    return float(v)


@dataclass(frozen=True, eq=False)
class Element:
    """A class of step-function sequences, stored as ``(eta, phi1, phi3)``.

    Supports ``+``, ``-`` and scalar ``*``. Adding a plain number shifts
    ``eta``. ``==`` is mathematical equality of all three components.
    """

    eta: Fraction | float
    phi1: SmoothFn
    phi3: SmoothFn

    def __post_init__(self):
        object.__setattr__(self, "eta", _as_eta(self.eta))
        object.__setattr__(self, "phi1", simplify(as_fn(self.phi1)))
        object.__setattr__(self, "phi3", simplify(as_fn(self.phi3)))

    def __add__(self, other):
        if isinstance(other, Element):
            return Element(self.eta + other.eta, self.phi1 + other.phi1, self.phi3 + other.phi3)
        if isinstance(other, Real):
            return Element(self.eta + _as_eta(other), self.phi1, self.phi3)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Element(-self.eta, -self.phi1, -self.phi3)

    def __sub__(self, other):
        if isinstance(other, (Element, Real)):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, c):
        if not isinstance(c, Real):
            return NotImplemented
        c = _as_eta(c)
        return Element(self.eta * c, c * self.phi1, c * self.phi3)

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return (
            _eta_equal(self.eta, other.eta)
            and equal(self.phi1, other.phi1)
            and equal(self.phi3, other.phi3)
        )

    __hash__ = None

    def __repr__(self):
        return f"Element(eta={self.eta}, phi1={to_string(self.phi1)!r}, phi3={to_string(self.phi3)!r})"

    def to_dict(self) -> dict:
        return {"eta": _eta_json(self.eta), "phi1": to_string(self.phi1), "phi3": to_string(self.phi3)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "Element":
        eta = data["eta"]
        eta = Fraction(eta) if isinstance(eta, int) else eta
        return cls(eta, parse(data["phi1"]), parse(data["phi3"]))

    @classmethod
    def from_json(cls, text: str) -> "Element":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class LimitDescriptor:
    """Limit process ``eta + Phi(B(t)) + kappa * int_0^t psi(B(s)) dW(s)``."""

    eta: Fraction | float
    Phi: SmoothFn
    psi: SmoothFn

    def to_dict(self) -> dict:
        return {"eta": _eta_json(self.eta), "Phi": to_string(self.Phi), "psi": to_string(self.psi)}

    def __repr__(self):
        return f"LimitDescriptor(eta={self.eta}, Phi={to_string(self.Phi)!r}, psi={to_string(self.psi)!r})"


@dataclass(frozen=True)
class Decomposition:
    """``N = eta + g(B) + int theta(B) d[[B]]`` with ``g(0) = 0``."""

    eta: Fraction | float
    g: SmoothFn
    theta: SmoothFn

    def __repr__(self):
        return f"Decomposition(eta={self.eta}, g={to_string(self.g)!r}, theta={to_string(self.theta)!r})"

    def recompose(self) -> Element:
        return from_function(self.g) + integral_against_cubic(self.theta, X) + self.eta


# ---------------------------------------------------------------------------
# the constant kappa
# ---------------------------------------------------------------------------


def kappa_squared(terms: int = 10_000) -> float:
    """Truncated series ``(3/4) sum_{|r|<=R} (|r+1|^{1/3} + |r-1|^{1/3} - 2|r|^{1/3})^3``.

    Terms decay like ``|r|^{-5}``; ``R = 10**4`` is accurate to well beyond
    ten digits. Summed from the smallest terms up.
    """
    if terms < 0:
        raise ValueError("truncation must be non-negative")
    r = np.arange(1, terms + 1, dtype=float)
    tail = np.cbrt(r + 1) + np.cbrt(r - 1) - 2 * np.cbrt(r)
    # symmetric in r; centre term is 2^3
    side = math.fsum((tail**3)[::-1])
    return 0.75 * (8.0 + 2.0 * side)


def kappa(terms: int = 10_000) -> float:
    return math.sqrt(kappa_squared(terms))


# ---------------------------------------------------------------------------
# constructions
# ---------------------------------------------------------------------------


def constant(eta) -> Element:
    return Element(eta, ZERO, ZERO)


def from_function(f) -> Element:
    """The class of ``f(B)``: ``(f(0), f', f'''/24)``."""
    f = as_fn(f)
    eta = compose(f, ZERO)
    return Element(simplify(eta).value, differentiate(f), differentiate(f, 3) / 24)


def circle(f, N: Element) -> Element:
    """``int f(B) dN`` via symmetric Riemann sums."""
    f = as_fn(f)
    phi1 = f * N.phi1
    phi3 = _F(1, 8) * differentiate(f, 2) * N.phi1 + f * N.phi3
    return Element(0, phi1, phi3)


def cubic_variation(N: Element) -> Element:
    """Signed cubic variation ``[[N]]``: ``(0, 0, phi1^3)``."""
    return Element(0, ZERO, N.phi1**3)


def integral_against_cubic(f, g) -> Element:
    """``int f(B) d[[g(B)]]``: ``(0, 0, f * (g')^3)``."""
    f, g = as_fn(f), as_fn(g)
    return Element(0, ZERO, f * differentiate(g) ** 3)


def triple_covariation_element(f, g, h) -> Element:
    """Class of ``sum dX dY dZ`` for ``X, Y, Z = f(B), g(B), h(B)``."""
    f, g, h = as_fn(f), as_fn(g), as_fn(h)
    return Element(0, ZERO, differentiate(f) * differentiate(g) * differentiate(h))


def decompose(N: Element) -> Decomposition:
    """Unique ``(eta, g, theta)`` with ``g(0) = 0``.

    Raises :class:`~weakstrat.expr.NotIntegrableError` when ``phi1`` has no
    antiderivative in the grammar.
    """
    g = antiderivative(N.phi1)
    theta = simplify(N.phi3 - differentiate(N.phi1, 2) / 24)
    return Decomposition(N.eta, g, theta)


def limit_descriptor(N: Element) -> LimitDescriptor:
    d = decompose(N)
    return LimitDescriptor(d.eta, d.g, d.theta)


# ---------------------------------------------------------------------------
# change-of-variable identities
# ---------------------------------------------------------------------------


def theorem_main_sides(f, g, theta) -> tuple[Element, Element]:
    """Both sides of the expansion of ``int f(B) d(g(B) + int theta(B) d[[B]])``."""
    f, g, theta = as_fn(f), as_fn(g), as_fn(theta)
    N = from_function(g) + integral_against_cubic(theta, X)
    left = circle(f, N)
    Phi = antiderivative(f * differentiate(g))
    correction = (differentiate(f, 2) * differentiate(g) - differentiate(f) * differentiate(g, 2)) / 12
    right = (
        from_function(Phi)
        + integral_against_cubic(correction, X)
        # int f dV = int f*theta d[[B]]
        + integral_against_cubic(f * theta, X)
    )
    return left, right


def check_theorem_main(f, g, theta) -> bool:
    left, right = theorem_main_sides(f, g, theta)
    return left == right


def ito_formula_sides(phi, g) -> tuple[Element, Element]:
    phi, g = as_fn(phi), as_fn(g)
    left = from_function(compose(phi, g))
    phi_at = simplify(compose(phi, compose(g, ZERO)))
    right = (
        constant(phi_at.value)
        + circle(compose(differentiate(phi), g), from_function(g))
        - _F(1, 12) * integral_against_cubic(compose(differentiate(phi, 3), g), g)
    )
    return left, right


def check_ito_formula(phi, g) -> bool:
    left, right = ito_formula_sides(phi, g)
    return left == right


def substitution_rule_sides(f, g, h, theta) -> tuple[Element, Element]:
    f, g, h, theta = (as_fn(v) for v in (f, g, h, theta))
    N = from_function(g) + integral_against_cubic(theta, X)
    M = circle(f, N)
    left = circle(h, M)
    right = circle(f * h, N) - _F(1, 4) * integral_against_cubic(
        differentiate(f) * differentiate(g) * differentiate(h), X
    )
    return left, right


def check_substitution_rule(f, g, h, theta) -> bool:
    left, right = substitution_rule_sides(f, g, h, theta)
    return left == right


# ---------------------------------------------------------------------------
# randomized identity suites
# ---------------------------------------------------------------------------


def random_polynomial(rng: random.Random, max_degree: int = 5, max_num: int = 9, max_den: int = 6) -> SmoothFn:
    """Polynomial of random degree with random small rational coefficients."""
    degree = rng.randint(0, max_degree)
    coeffs = {}
    for k in range(degree + 1):
        c = Fraction(rng.randint(-max_num, max_num), rng.randint(1, max_den))
        if c != 0:
            coeffs[k] = c
    if degree > 0 and degree not in coeffs:
        coeffs[degree] = Fraction(1)
    return from_poly(coeffs)


def run_identity_suite(cases: int = 100, seed: int = 7) -> dict[str, tuple[int, int]]:
    """Run all three change-of-variable checkers on random polynomial instances.

    Returns ``{"main": (passed, total), "ito": ..., "substitution": ...}``.
    Degrees: at most 5 for the first two, at most 4 for the substitution rule.
    """
    rng = random.Random(seed)
    results = {"main": 0, "ito": 0, "substitution": 0}
    for _ in range(cases):
        f, g, th = (random_polynomial(rng, 5) for _ in range(3))
        results["main"] += check_theorem_main(f, g, th)
        phi, g = random_polynomial(rng, 5), random_polynomial(rng, 5)
        results["ito"] += check_ito_formula(phi, g)
        f, g, h, th = (random_polynomial(rng, 4) for _ in range(4))
        results["substitution"] += check_substitution_rule(f, g, h, th)
    return {k: (v, cases) for k, v in results.items()}


__all__ = [
    "Element",
    "LimitDescriptor",
    "Decomposition",
    "kappa_squared",
    "kappa",
    "constant",
    "from_function",
    "circle",
    "cubic_variation",
    "integral_against_cubic",
    "triple_covariation_element",
    "decompose",
    "limit_descriptor",
    "check_theorem_main",
    "check_ito_formula",
    "check_substitution_rule",
    "theorem_main_sides",
    "ito_formula_sides",
    "substitution_rule_sides",
    "random_polynomial",
    "run_identity_suite",
]
