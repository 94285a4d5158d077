"""Built-in vector-field systems: Euclidean, Grushin and Heisenberg."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import Frame, PolyVectorField, generate_frame


@dataclass(frozen=True)
class System:
    name: str
    generators: tuple[PolyVectorField, ...]
    r: int
    dilation: tuple[int, ...] | None = None   # exact global dilation weights, if any

    @property
    def N(self) -> int:
        return self.generators[0].dim

    def frame(self) -> Frame:
        return generate_frame(self.generators, self.r)


def euclidean(n: int = 2) -> System:
    gens = tuple(PolyVectorField.coordinate(i, n) for i in range(n))
    return System(f"euclidean{n}", gens, 1, (1,) * n)


def grushin(r: int = 2) -> System:
    """``d/dx1`` and ``x1^(r-1) d/dx2`` on R^2."""
    if r < 1:
        raise ValueError("r must be >= 1")
    second = "1" if r == 1 else ("x1" if r == 2 else f"x1^{r - 1}")
    gens = (PolyVectorField(["1", "0"]), PolyVectorField(["0", second]))
    return System(f"grushin{r}", gens, r, (1, r))


def heisenberg() -> System:
    """Left-invariant fields of the first Heisenberg group."""
    gens = (PolyVectorField(["1", "0", "-1/2*x2"]), PolyVectorField(["0", "1", "1/2*x1"]))
    return System("heisenberg", gens, 2, (1, 1, 2))


def custom(generators: list[list[str]], r: int, name: str = "custom",
           dilation=None) -> System:
    gens = tuple(PolyVectorField.parse(g) for g in generators)
    return System(name, gens, int(r), tuple(dilation) if dilation else None)


def get(name: str, r: int | None = None, n: int | None = None) -> System:
    key = name.lower()
    if key.startswith("euclid"):
        return euclidean(n or 2)
    if key.startswith("grushin"):
        return grushin(r or 2)
    if key.startswith("heisenberg"):
        return heisenberg()
    raise KeyError(f"unknown example {name!r}")


def vanishing_lambda_weight(points, p: float = 1.0) -> np.ndarray:
    """Weight of the degenerate frame ``d1, d2, (1-a) d1 + a d2`` with ``I = (1, 3)``.

    Here ``lambda_I = a`` and ``a(x) = max(x1, 0)^3`` vanishes on the open half
    plane ``x1 < 0``.  Such an ``a`` is not polynomial, so the weight is
    supplied as samples rather than through a frame.  ``Q_I = 2``.
    """
    pts = np.asarray(points, dtype=float)
    a = np.maximum(pts[..., 0], 0.0) ** 3
    return np.abs(a) ** (p / (2 - p))
