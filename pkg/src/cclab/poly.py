"""Exact multivariate polynomials over the rationals.

Polynomials are :class:`sympy.Poly` objects in the generators ``x1..xN`` with
domain ``QQ``.  This module adds the small text grammar used by config files
and fast vectorised float evaluation on point clouds.

Grammar::

    poly  := ["-"] term (("+" | "-") term)*
    term  := factor ("*" factor)*
    factor:= number | var ["^" int]
    number:= decimal | int "/" int
    var   := "x" int            (1-based coordinate index)
"""

from __future__ import annotations

import re
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy as sp

_NUMBER = re.compile(r"^(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_RATIONAL = re.compile(r"^\d+/\d+$")
_VAR = re.compile(r"^x(\d+)(\^(\d+))?$")


class PolynomialSyntaxError(ValueError):
    """Raised for strings outside the polynomial grammar."""


@lru_cache(maxsize=None)
def symbols(n: int) -> tuple:
    return sp.symbols(" ".join(f"x{i + 1}" for i in range(n)), real=True, seq=True)


def zero(n: int) -> sp.Poly:
    return sp.Poly(0, *symbols(n), domain="QQ")


def constant(c, n: int) -> sp.Poly:
    return sp.Poly(sp.Rational(Fraction(c)), *symbols(n), domain="QQ")


def coordinate(i: int, n: int) -> sp.Poly:
    """The coordinate function ``x_{i+1}`` (0-based ``i``)."""
    return sp.Poly(symbols(n)[i], *symbols(n), domain="QQ")


def _split_terms(text: str) -> list[tuple[int, str]]:
    s = text.replace(" ", "").replace("\t", "")
    if not s:
        raise PolynomialSyntaxError("empty polynomial")
    terms = []
    sign = 1
    buf = ""
    for i, ch in enumerate(s):
        # a sign only separates terms when it is not an exponent sign (1e-3)
        if ch in "+-" and not (buf and buf[-1] in "eE" and i > 0 and _looks_numeric(buf[:-1])):
            if buf:
                terms.append((sign, buf))
            elif terms or i > 0:
                raise PolynomialSyntaxError(f"dangling operator in {text!r}")
            sign = -1 if ch == "-" else 1
            buf = ""
        else:
            buf += ch
    if not buf:
        raise PolynomialSyntaxError(f"trailing operator in {text!r}")
    terms.append((sign, buf))
    return terms


def _looks_numeric(s: str) -> bool:
    tail = s.rsplit("*", 1)[-1]
    return bool(re.match(r"^(\d+(\.\d*)?|\.\d+)$", tail))


def parse_polynomial(text: str, n: int) -> sp.Poly:
    """Parse ``text`` into an exact polynomial in ``n`` variables.

    >>> parse_polynomial("2*x1^2 - 1/3*x2", 2).as_expr()
    2*x1**2 - x2/3
    """
    if n < 1:
        raise ValueError("dimension must be positive")
    gens = symbols(n)
    result = sp.Integer(0)
    for sign, term in _split_terms(text):
        coeff = Fraction(sign)
        monomial = sp.Integer(1)
        for factor in term.split("*"):
            if not factor:
                raise PolynomialSyntaxError(f"empty factor in {text!r}")
            if _RATIONAL.match(factor):
                num, den = factor.split("/")
                if int(den) == 0:
                    raise PolynomialSyntaxError(f"zero denominator in {text!r}")
                coeff *= Fraction(int(num), int(den))
            elif _NUMBER.match(factor):
                coeff *= Fraction(factor)
            else:
                m = _VAR.match(factor)
                if m is None:
                    raise PolynomialSyntaxError(f"bad factor {factor!r} in {text!r}")
                idx = int(m.group(1))
                if not 1 <= idx <= n:
                    raise PolynomialSyntaxError(
                        f"variable x{idx} out of range for dimension {n}")
                power = int(m.group(3)) if m.group(3) else 1
                monomial *= gens[idx - 1] ** power
        result += sp.Rational(coeff.numerator, coeff.denominator) * monomial
    return sp.Poly(result, *gens, domain="QQ")


def format_polynomial(poly: sp.Poly) -> str:
    """Inverse of :func:`parse_polynomial` (canonical term order)."""
    terms = poly.terms()
    if not terms:
        return "0"
    out = []
    for monom, coeff in terms:
        c = Fraction(int(coeff.numerator), int(coeff.denominator))
        sign = "-" if c < 0 else "+"
        c = abs(c)
        factors = []
        if c != 1 or not any(monom):
            factors.append(str(c))
        for i, e in enumerate(monom):
            if e == 1:
                factors.append(f"x{i + 1}")
            elif e > 1:
                factors.append(f"x{i + 1}^{e}")
        out.append((sign, "*".join(factors)))
    text = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        text += f" {sign} {body}"
    return text


class PolyEvaluator:
    """Vectorised float evaluation of a fixed polynomial.

    Stores the exponent matrix and float coefficients once so repeated calls on
    large point clouds avoid sympy entirely.
    """

    def __init__(self, poly: sp.Poly):
        terms = poly.terms()
        n = len(poly.gens)
        if terms:
            self.exponents = np.array([m for m, _ in terms], dtype=int).reshape(len(terms), n)
            self.coeffs = np.array([float(c) for _, c in terms])
        else:
            self.exponents = np.zeros((0, n), dtype=int)
            self.coeffs = np.zeros(0)
        self.n = n

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape ``(..., n)``."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for e, c in zip(self.exponents, self.coeffs):
            term = np.full(pts.shape[:-1], c)
            for i, k in enumerate(e):
                if k:
                    term = term * pts[..., i] ** k
            out = out + term
        return out


def eval_exact(poly: sp.Poly, point) -> Fraction:
    """Evaluate exactly at a point; floats are converted to their exact binary value."""
    vals = [Fraction(v) for v in point]
    total = Fraction(0)
    for monom, coeff in poly.terms():
        t = Fraction(int(coeff.numerator), int(coeff.denominator))
        for v, e in zip(vals, monom):
            if e:
                t *= v ** e
        total += t
    return total


def depends_on(poly: sp.Poly, i: int) -> bool:
    return any(m[i] for m, _ in poly.terms())
