"""Test functions: polynomial times compact bump, raw samples, complex pairs; dilations."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import sympy as sp

from . import poly as P
from .fields import PolyVectorField
from .grid import GridDomain


@dataclass(frozen=True)
class TestFunction:
    """``p(x) * b(x)^3`` with ``b = max(1 - sum ((x_i - c_i)/r_i)^2, 0)``.

    Without ``center`` the bump factor is dropped and ``f = p`` is a plain
    polynomial.  Derivatives along polynomial fields are exact formulas
    evaluated in floating point.
    """

    __test__ = False    # not a pytest class

    poly: sp.Poly
    center: tuple[float, ...] | None = None
    radii: tuple[float, ...] | None = None

    def __post_init__(self):
        if (self.center is None) != (self.radii is None):
            raise ValueError("center and radii go together")
        if self.center is not None:
            c = tuple(float(v) for v in self.center)
            r = tuple(float(v) for v in np.broadcast_to(self.radii, (len(c),)))
            if len(c) != self.N or any(v <= 0 for v in r):
                raise ValueError("bad bump center or radii")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "radii", r)

    @classmethod
    def polynomial(cls, text: str, n: int) -> "TestFunction":
        return cls(P.parse_polynomial(text, n))

    @classmethod
    def bump(cls, center, radii, poly: str | sp.Poly = "1") -> "TestFunction":
        n = len(center)
        p = P.parse_polynomial(poly, n) if isinstance(poly, str) else poly
        return cls(p, tuple(center), tuple(np.broadcast_to(radii, (n,))))

    @property
    def N(self) -> int:
        return len(self.poly.gens)

    @property
    def compact(self) -> bool:
        return self.center is not None

    def support_box(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.compact:
            raise ValueError("polynomial test functions have no compact support")
        c, r = np.array(self.center), np.array(self.radii)
        return c - r, c + r

    def support_inside(self, grid: GridDomain) -> bool:
        if not self.compact:
            return False
        lo, hi = self.support_box()
        return bool(np.all(lo >= np.array(grid.lower)) and np.all(hi <= np.array(grid.upper)))

    @cached_property
    def _p(self) -> P.PolyEvaluator:
        return P.PolyEvaluator(self.poly)

    def _b(self, pts):
        c, r = np.array(self.center), np.array(self.radii)
        u = (pts - c) / r
        return 1.0 - np.sum(u * u, axis=-1), u / r

    def __call__(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        val = self._p(pts)
        if self.compact:
            b, _ = self._b(pts)
            val = np.where(b > 0, val * np.maximum(b, 0.0) ** 3, 0.0)
        return val

    def derivative(self, X: PolyVectorField, points) -> np.ndarray:
        """``X f`` at ``points``."""
        pts = np.asarray(points, dtype=float)
        Xp = P.PolyEvaluator(X.apply(self.poly))(pts)
        if not self.compact:
            return Xp
        b, du = self._b(pts)
        bb = np.maximum(b, 0.0)
        Xb = -2.0 * np.sum(X(pts) * du, axis=-1)
        return Xp * bb ** 3 + self._p(pts) * 3.0 * bb ** 2 * Xb

    def sample(self, grid: GridDomain) -> np.ndarray:
        return self(grid.centers)


@dataclass(frozen=True)
class SampledFunction:
    """Raw grid samples; derivatives by centred differences only."""

    grid: GridDomain
    values: np.ndarray

    def sample(self, grid: GridDomain) -> np.ndarray:
        if grid != self.grid:
            raise ValueError("sampled function lives on a different grid")
        return np.asarray(self.values, dtype=float).reshape(grid.shape)


@dataclass(frozen=True)
class ComplexFunction:
    """``f = re + i im`` with real test-function parts."""

    re: TestFunction
    im: TestFunction

    def __call__(self, points) -> np.ndarray:
        return self.re(points) + 1j * self.im(points)

    def sample(self, grid: GridDomain) -> np.ndarray:
        return self(grid.centers)


def scaled(f: TestFunction, c: float) -> TestFunction:
    return TestFunction(f.poly * sp.Rational(Fraction(c)), f.center, f.radii)


def finite_difference_partials(values: np.ndarray, grid: GridDomain) -> list[np.ndarray]:
    """Second-order centred differences (one-sided second order at the edges)."""
    return [np.gradient(values, grid.spacing[i], axis=i, edge_order=2) for i in range(grid.ndim)]


def field_derivatives(generators: Sequence[PolyVectorField], f, grid: GridDomain,
                      mode: str = "symbolic") -> np.ndarray:
    """``(X_k f)`` at cell centres, shape ``(n, *grid.shape)`` (complex for complex ``f``)."""
    pts = grid.centers
    if isinstance(f, ComplexFunction):
        return (field_derivatives(generators, f.re, grid, mode)
                + 1j * field_derivatives(generators, f.im, grid, mode))
    if mode == "symbolic":
        if not isinstance(f, TestFunction):
            raise TypeError("symbolic gradients need a TestFunction")
        return np.stack([f.derivative(X, pts) for X in generators])
    if mode != "fd":
        raise ValueError(f"unknown gradient mode {mode!r}")
    d = finite_difference_partials(f.sample(grid), grid)
    return np.stack([sum(X(pts)[..., i] * d[i] for i in range(grid.ndim)) for X in generators])


# ---------------------------------------------------------------- dilations

@dataclass(frozen=True)
class Dilation:
    """``delta . x = (delta^{w_1} x_1, ..., delta^{w_N} x_N)``."""

    weights: tuple[int, ...]

    def __post_init__(self):
        w = tuple(int(v) for v in self.weights)
        if not w or any(v < 1 for v in w):
            raise ValueError("dilation weights must be positive integers")
        object.__setattr__(self, "weights", w)

    @property
    def Q(self) -> int:
        return sum(self.weights)

    def __call__(self, delta: float, points) -> np.ndarray:
        return np.asarray(points, dtype=float) * float(delta) ** np.array(self.weights)

    def homogeneous_degree(self, X: PolyVectorField) -> int | None:
        """``k`` with ``X`` pushed forward by ``delta .`` equal to ``delta^{-k} X``, if it exists.

        The coefficient of ``d/dx_i`` must be a sum of monomials of weighted
        degree ``w_i - k``.
        """
        degs = set()
        for i, comp in enumerate(X.components):
            for mono, coeff in comp.terms():
                if coeff != 0:
                    degs.add(self.weights[i] - sum(a * w for a, w in zip(mono, self.weights)))
        return degs.pop() if len(degs) == 1 else None

    def validate(self, generators: Sequence[PolyVectorField]) -> None:
        for X in generators:
            if X.dim != len(self.weights):
                raise ValueError("dilation and field dimensions differ")
            if self.homogeneous_degree(X) != 1:
                raise ValueError(f"field {X} is not homogeneous of degree 1 under {self.weights}")


def dilation_stable(lower, upper) -> bool:
    """A box is mapped into itself by every ``delta . `` with ``delta <= 1`` iff it contains 0."""
    return bool(np.all(np.asarray(lower) <= 0) and np.all(np.asarray(upper) >= 0))


def dilate(f: TestFunction, D: Dilation, delta: float, domain: GridDomain | None = None) -> TestFunction:
    """``f_delta(x) = f(delta^{-1} . x)``.

    With ``domain`` given, the support of ``f`` must sit in that box and the
    box must be stable under the dilations.
    """
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    if len(D.weights) != f.N:
        raise ValueError("dilation and function dimensions differ")
    if domain is not None:
        if not dilation_stable(domain.lower, domain.upper):
            raise ValueError("domain is not stable under the dilation")
        if not f.support_inside(domain):
            raise ValueError("support of f leaves the dilation-stable domain")
    if delta == 1:
        return f
    d = sp.Rational(Fraction(delta))
    xs = P.symbols(f.N)
    expr = f.poly.as_expr().subs({x: x / d ** w for x, w in zip(xs, D.weights)}, simultaneous=True)
    poly = sp.Poly(sp.expand(expr), *xs, domain="QQ")
    if not f.compact:
        return TestFunction(poly)
    scale = np.array([float(delta) ** w for w in D.weights])
    return TestFunction(poly, tuple(np.array(f.center) * scale), tuple(np.array(f.radii) * scale))


# ---------------------------------------------------------------- families

def bump_family(domain: GridDomain, count: int, seed: int, radius=(0.15, 0.4),
                polys: Sequence[str] = ("1",)) -> list[TestFunction]:
    """``count`` bumps with seeded random centres and radii, supported inside ``domain``.

    Radii are fractions of the domain half-widths; polynomial factors cycle
    through ``polys``.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.array(domain.lower), np.array(domain.upper)
    half = 0.5 * (hi - lo)
    out = []
    for k in range(count):
        r = rng.uniform(radius[0], radius[1], size=domain.ndim) * half
        c = rng.uniform(lo + r, hi - r)
        out.append(TestFunction.bump(c, r, polys[k % len(polys)]))
    return out


def indicator_sweep(grid: GridDomain, boxes) -> list[np.ndarray]:
    """Indicators of boxes ``(lower, upper)`` sampled at cell centres."""
    pts = grid.centers
    out = []
    for lo, hi in boxes:
        inside = np.all((pts >= np.asarray(lo)) & (pts <= np.asarray(hi)), axis=-1)
        out.append(inside.astype(float))
    return out


def dyadic_boxes(center, sizes, offsets) -> list[tuple[np.ndarray, np.ndarray]]:
    """Cubes of side ``s`` for ``s`` in ``sizes``, with lower corners ``center + o*s``."""
    c = np.asarray(center, dtype=float)
    boxes = []
    for s in sizes:
        for o in offsets:
            lo = c + np.asarray(o, dtype=float) * s
            boxes.append((lo, lo + s))
    return boxes


def cell_indicators(grid: GridDomain, points) -> list[np.ndarray]:
    """``1/|cell|`` on the cell containing each point: unit-mass approximate identities."""
    out = []
    for x in points:
        f = np.zeros(grid.size)
        f[grid.flat_index(x)] = 1.0 / grid.cell_volume
        out.append(f.reshape(grid.shape))
    return out


def polynomial_family(texts: Sequence[str], n: int) -> list[TestFunction]:
    return [TestFunction.polynomial(t, n) for t in texts]
