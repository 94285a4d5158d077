"""Polynomial vector fields, commutator frames and the quantities built on them."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
import sympy as sp

from . import poly as P

RANK_RTOL = 1e-9
RESIDUAL_TOL = 1e-8


class PolyVectorField:
    """A vector field ``sum_i c_i(x) d/dx_i`` with exact polynomial components."""

    def __init__(self, components: Sequence):
        comps = list(components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        n = len(comps)
        gens = P.symbols(n)
        polys = []
        for c in comps:
            if isinstance(c, str):
                polys.append(P.parse_polynomial(c, n))
            elif isinstance(c, sp.Poly):
                if len(c.gens) != n:
                    raise ValueError("component polynomial has wrong number of variables")
                polys.append(c.set_domain("QQ"))
            else:
                polys.append(sp.Poly(sp.sympify(c), *gens, domain="QQ"))
        self.components: tuple[sp.Poly, ...] = tuple(polys)

    @property
    def dim(self) -> int:
        return len(self.components)

    @classmethod
    def parse(cls, strings: Sequence[str]) -> "PolyVectorField":
        return cls(list(strings))

    @classmethod
    def coordinate(cls, i: int, n: int) -> "PolyVectorField":
        """The coordinate field ``d/dx_{i+1}``."""
        return cls([P.constant(1 if k == i else 0, n) for k in range(n)])

    def to_strings(self) -> list[str]:
        return [P.format_polynomial(c) for c in self.components]

    def is_zero(self) -> bool:
        return all(c.is_zero for c in self.components)

    def apply(self, f: sp.Poly) -> sp.Poly:
        """Directional derivative ``Y f`` of a polynomial."""
        gens = P.symbols(self.dim)
        out = P.zero(self.dim)
        for c, x in zip(self.components, gens):
            if not c.is_zero:
                out = out + c * f.diff(x)
        return out

    def __add__(self, other: "PolyVectorField") -> "PolyVectorField":
        _check_dims(self, other)
        return PolyVectorField([a + b for a, b in zip(self.components, other.components)])

    def __neg__(self) -> "PolyVectorField":
        return PolyVectorField([-a for a in self.components])

    def __sub__(self, other: "PolyVectorField") -> "PolyVectorField":
        return self + (-other)

    def scale(self, c) -> "PolyVectorField":
        c = sp.Rational(Fraction(c))
        return PolyVectorField([a * c for a in self.components])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyVectorField) or other.dim != self.dim:
            return NotImplemented
        return all((a - b).is_zero for a, b in zip(self.components, other.components))

    def __hash__(self) -> int:
        return hash(tuple(tuple(c.terms()) for c in self.components))

    def __repr__(self) -> str:
        return f"PolyVectorField({self.to_strings()!r})"

    @cached_property
    def _evaluators(self) -> list[P.PolyEvaluator]:
        return [P.PolyEvaluator(c) for c in self.components]

    def __call__(self, points) -> np.ndarray:
        """Float values at ``points`` of shape ``(..., N)``; result has the same shape."""
        pts = np.asarray(points, dtype=float)
        return np.stack([ev(pts) for ev in self._evaluators], axis=-1)

    def eval_exact(self, point) -> list[Fraction]:
        return [P.eval_exact(c, point) for c in self.components]

    def depends_on(self, i: int) -> bool:
        return any(P.depends_on(c, i) for c in self.components)


def _check_dims(*fields: PolyVectorField) -> None:
    dims = {f.dim for f in fields}
    if len(dims) > 1:
        raise ValueError(f"dimension mismatch: {sorted(dims)}")


def bracket(Y: PolyVectorField, Z: PolyVectorField) -> PolyVectorField:
    """Commutator ``[Y, Z] = (Y.grad) Z - (Z.grad) Y``, computed exactly."""
    _check_dims(Y, Z)
    return PolyVectorField([Y.apply(zc) - Z.apply(yc)
                            for yc, zc in zip(Y.components, Z.components)])


@dataclass(frozen=True)
class FrameEntry:
    field: PolyVectorField
    degree: int
    word: tuple[int, ...]   # bracket word over generator indices (0-based)

    def label(self) -> str:
        names = [f"X{i + 1}" for i in self.word]
        s = names[-1]
        for name in reversed(names[:-1]):
            s = f"[{name},{s}]"
        return s


@dataclass(frozen=True)
class Frame:
    """Ordered list of fields with formal degrees and bracket provenance."""

    entries: tuple[FrameEntry, ...]
    generators: tuple[PolyVectorField, ...] = field(default=())
    pruned: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        if not self.entries:
            raise ValueError("empty frame")
        _check_dims(*(e.field for e in self.entries))
        for e in self.entries:
            if e.degree < 1:
                raise ValueError("formal degrees must be positive")
            if e.word and len(e.word) != e.degree:
                raise ValueError("degree must equal bracket-word length")

    @property
    def N(self) -> int:
        return self.entries[0].field.dim

    @property
    def q(self) -> int:
        return len(self.entries)

    @property
    def fields(self) -> list[PolyVectorField]:
        return [e.field for e in self.entries]

    @property
    def degrees(self) -> np.ndarray:
        return np.array([e.degree for e in self.entries], dtype=int)

    def values(self, points) -> np.ndarray:
        """Field values with shape ``(..., q, N)``."""
        pts = np.asarray(points, dtype=float)
        return np.stack([f(pts) for f in self.fields], axis=-2)

    def invariant_axes(self) -> tuple[int, ...]:
        """Coordinates on which no frame field depends (exact translation symmetries)."""
        return tuple(i for i in range(self.N)
                     if not any(f.depends_on(i) for f in self.fields))

    def fingerprint(self) -> tuple:
        return tuple((tuple(f.to_strings()), e.degree) for f, e in zip(self.fields, self.entries))

    @classmethod
    def from_fields(cls, fields: Sequence[PolyVectorField], degrees: Sequence[int]) -> "Frame":
        """Frame with explicit degrees and no bracket provenance."""
        return cls(tuple(FrameEntry(f, int(d), ()) for f, d in zip(fields, degrees)))


def generate_frame(generators: Sequence[PolyVectorField], r: int) -> Frame:
    """All iterated brackets of word length ``<= r``.

    Words are right-nested, ``[X_{i1},[X_{i2},...,X_{ik}]]``, and ordered by
    (length, lexicographic word).  Identically zero brackets, and brackets equal
    to plus or minus an earlier bracket of the same length, are dropped and
    recorded in ``Frame.pruned``.
    """
    gens = list(generators)
    if not gens:
        raise ValueError("need at least one generator")
    if r < 1:
        raise ValueError("r must be >= 1")
    _check_dims(*gens)
    entries = [FrameEntry(g, 1, (i,)) for i, g in enumerate(gens)]
    pruned = []
    layer = {(i,): g for i, g in enumerate(gens)}
    for length in range(2, r + 1):
        nxt = {}
        for i in range(len(gens)):
            for word, Z in sorted(layer.items()):
                w = (i,) + word
                B = bracket(gens[i], Z)
                if B.is_zero():
                    pruned.append(w)
                else:
                    nxt[w] = B
        kept = {}
        for w in sorted(nxt):
            B = nxt[w]
            if any(B == F or B == -F for F in kept.values()):
                pruned.append(w)
            else:
                kept[w] = B
                entries.append(FrameEntry(B, length, w))
        layer = kept
    zero_gens = [e.word for e in entries if e.field.is_zero()]
    entries = [e for e in entries if not e.field.is_zero()]
    return Frame(tuple(entries), tuple(gens), tuple(pruned) + tuple(zero_gens))


def _validate_tuple(frame: Frame, I: Sequence[int]) -> tuple[int, ...]:
    I = tuple(int(i) for i in I)
    if len(I) != frame.N:
        raise ValueError(f"tuple I must have length N={frame.N}, got {len(I)}")
    for i in I:
        if not 1 <= i <= frame.q:
            raise IndexError(f"index {i} out of range 1..{frame.q}")
    return I


def _fraction_det(rows: list[list[Fraction]]) -> Fraction:
    m = [row[:] for row in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


def _fraction_rank(rows: list[list[Fraction]]) -> int:
    m = [row[:] for row in rows]
    if not m:
        return 0
    nrows, ncols = len(m), len(m[0])
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, nrows) if m[r][c] != 0), None)
        if piv is None:
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for r in range(rank + 1, nrows):
            f = m[r][c] / m[rank][c]
            if f:
                for k in range(c, ncols):
                    m[r][k] -= f * m[rank][k]
        rank += 1
        if rank == nrows:
            break
    return rank


def lambda_I(frame: Frame, I: Sequence[int], x) -> float:
    """``det(Y_{i_1}, ..., Y_{i_N})(x)``, evaluated exactly then rounded."""
    I = _validate_tuple(frame, I)
    cols = [frame.entries[i - 1].field.eval_exact(x) for i in I]
    rows = [[cols[j][i] for j in range(len(I))] for i in range(frame.N)]
    return float(_fraction_det(rows))


def lambda_grid(frame: Frame, I: Sequence[int], points) -> np.ndarray:
    """Float ``lambda_I`` on a point cloud of shape ``(..., N)``."""
    I = _validate_tuple(frame, I)
    pts = np.asarray(points, dtype=float)
    cols = [frame.entries[i - 1].field(pts) for i in I]
    mat = np.stack(cols, axis=-1)  # (..., N, N) with j-th column Y_{i_j}
    return np.linalg.det(mat)


def degree_QI(frame: Frame, I: Sequence[int]) -> int:
    I = _validate_tuple(frame, I)
    return int(sum(frame.entries[i - 1].degree for i in I))


def all_tuples(frame: Frame, distinct: bool = True):
    """N-tuples of frame indices (1-based); sorted combinations when ``distinct``.

    Repeated or permuted tuples only change the sign of lambda, so the
    combinations suffice for maxima of ``|lambda_J|``.
    """
    idx = range(1, frame.q + 1)
    if distinct:
        return list(itertools.combinations(idx, frame.N))
    return list(itertools.product(idx, repeat=frame.N))


def filtration_dims(frame: Frame, x) -> list[int]:
    """``n_j(x) = dim V_j(x) - dim V_{j-1}(x)`` for ``j = 1..max degree``, by exact rank."""
    r = int(frame.degrees.max())
    vals = [e.field.eval_exact(x) for e in frame.entries]
    dims = [0]
    for j in range(1, r + 1):
        rows = [v for v, e in zip(vals, frame.entries) if e.degree <= j]
        dims.append(_fraction_rank(rows) if rows else 0)
    return [dims[j] - dims[j - 1] for j in range(1, r + 1)]


def nonisotropic_dim(frame: Frame, x) -> int:
    """``Q(x) = sum_j j n_j(x)``."""
    return int(sum((j + 1) * n for j, n in enumerate(filtration_dims(frame, x))))


def max_nonisotropic_dim(frame: Frame, points) -> int:
    """``sup Q(x)`` over a sample set (evaluated exactly at each sample)."""
    pts = np.asarray(points, dtype=float).reshape(-1, frame.N)
    if len(pts) == 0:
        raise ValueError("empty sample set")
    return max(nonisotropic_dim(frame, p) for p in np.unique(pts, axis=0))


@dataclass
class HomTypeReport:
    ranks: list[int]
    residuals: np.ndarray          # (n_samples, q, q)
    rank_ok: bool
    residual_ok: bool
    max_residual: float

    @property
    def passed(self) -> bool:
        return self.rank_ok and self.residual_ok

    def to_dict(self) -> dict:
        return {"ranks": self.ranks, "max_residual": self.max_residual,
                "rank_ok": self.rank_ok, "residual_ok": self.residual_ok,
                "pass": self.passed}


def _numerical_rank(mat: np.ndarray, rtol: float = RANK_RTOL) -> int:
    s = np.linalg.svd(mat, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def check_homogeneous_type(frame: Frame, samples, rank_rtol: float = RANK_RTOL,
                           residual_tol: float = RESIDUAL_TOL) -> HomTypeReport:
    """Pointwise test of the spanning and bracket-closure conditions.

    At each sample the rank of the ``N x q`` value matrix must be ``N`` and
    each ``[Y_j, Y_k](x)`` must be a least-squares combination of the
    ``Y_l(x)`` with ``d_l <= d_j + d_k`` up to ``residual_tol``.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, frame.N)
    if len(pts) == 0:
        raise ValueError("empty sample list")
    q, d = frame.q, frame.degrees
    brackets = {}
    for j in range(q):
        for k in range(j + 1, q):
            brackets[j, k] = bracket(frame.fields[j], frame.fields[k])
    vals = frame.values(pts)                       # (S, q, N)
    bvals = {jk: B(pts) for jk, B in brackets.items()}
    ranks = [_numerical_rank(v.T, rank_rtol) for v in vals]
    res = np.zeros((len(pts), q, q))
    for (j, k), bv in bvals.items():
        allowed = np.flatnonzero(d <= d[j] + d[k])
        for s in range(len(pts)):
            A = vals[s, allowed].T                 # (N, m)
            b = bv[s]
            coef, *_ = np.linalg.lstsq(A, b, rcond=None)
            r = float(np.linalg.norm(A @ coef - b))
            res[s, j, k] = res[s, k, j] = r
    max_res = float(res.max()) if res.size else 0.0
    return HomTypeReport(ranks, res, all(r == frame.N for r in ranks),
                         max_res <= residual_tol, max_res)


@dataclass(frozen=True)
class WeightSpec:
    """The weight ``w_{I,p} = |lambda_I|^{p/(Q_I - p)}``; requires ``1 <= p < Q_I``."""

    frame: Frame
    I: tuple[int, ...]
    p: float

    def __post_init__(self):
        object.__setattr__(self, "I", _validate_tuple(self.frame, self.I))
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.p >= self.Q:
            raise ValueError(f"p must be < Q_I (p={self.p}, Q_I={self.Q})")

    @property
    def Q(self) -> int:
        return degree_QI(self.frame, self.I)

    @property
    def exponent(self) -> float:
        return self.p / (self.Q - self.p)

    @property
    def p_star(self) -> float:
        return sobolev_exponent(self.p, self.Q)

    def __call__(self, points) -> np.ndarray:
        return np.abs(lambda_grid(self.frame, self.I, points)) ** self.exponent


def sobolev_exponent(p: float, Q: float) -> float:
    """``p*`` with ``1/p* = 1/p - 1/Q``."""
    if not 1 <= p < Q:
        raise ValueError(f"p must satisfy 1 <= p < Q (p={p}, Q={Q})")
    return p * Q / (Q - p)


def weight_w(spec: WeightSpec, x) -> float:
    lam = lambda_I(spec.frame, spec.I, x)
    return abs(lam) ** spec.exponent


def mu_density(frame: Frame, I: Sequence[int], x=None, points=None):
    """Density ``|lambda_I|^{1/(Q_I - 1)}`` of the measure ``mu_I``.

    Pass a single point ``x`` for an exact scalar or ``points`` for a float array.
    """
    Q = degree_QI(frame, I)
    if Q < 2:
        raise ValueError("mu_I needs Q_I >= 2")
    if points is not None:
        return np.abs(lambda_grid(frame, I, points)) ** (1.0 / (Q - 1))
    return abs(lambda_I(frame, I, x)) ** (1.0 / (Q - 1))
