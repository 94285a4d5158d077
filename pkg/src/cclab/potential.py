"""Fractional-integral operators with kernel ``rho(x,y) / V(x,y)`` and their norms."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import Frame, degree_QI, lambda_grid, sobolev_exponent
from .grid import GridDomain
from .metric import DistanceMaps, ReachabilityParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalarField:
    grid: GridDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("scalar field values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: GridDomain, fn) -> "ScalarField":
        return cls(grid, fn(grid.centers))


@dataclass(frozen=True)
class MeasureOnGrid:
    """Absolutely continuous measure ``density * dx`` sampled at cell centres."""

    grid: GridDomain
    density: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float).reshape(self.grid.shape)
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("densities must be finite and nonnegative")
        object.__setattr__(self, "density", d)

    @classmethod
    def lebesgue(cls, grid: GridDomain) -> "MeasureOnGrid":
        return cls(grid, np.ones(grid.shape))

    @classmethod
    def mu(cls, frame: Frame, I, grid: GridDomain) -> "MeasureOnGrid":
        Q = degree_QI(frame, I)
        if Q < 2:
            raise ValueError("mu_I needs Q_I >= 2")
        return cls(grid, np.abs(lambda_grid(frame, I, grid.centers)) ** (1.0 / (Q - 1)))

    @property
    def cell_mass(self) -> np.ndarray:
        return self.density * self.grid.cell_volume

    def of(self, mask) -> float:
        return float(self.cell_mass[np.asarray(mask, dtype=bool)].sum())


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, ScalarField) else np.asarray(g, dtype=float)


def lp_norm(g, p: float, m: MeasureOnGrid) -> float:
    """``(sum |g|^p density cellvol)^{1/p}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    v = np.abs(_values(g)).reshape(m.grid.shape)
    if math.isinf(p):
        return float(v[m.density > 0].max(initial=0.0))
    return float(np.sum(v ** p * m.cell_mass) ** (1.0 / p))


def weak_quasinorm(g, r: float, m: MeasureOnGrid) -> float:
    """``sup_alpha alpha * m(|g| > alpha)^{1/r}``.

    For sampled ``g`` the supremum is approached as ``alpha`` rises to a sample
    value ``v``, so it equals ``max_v v * m(|g| >= v)^{1/r}``.
    """
    if r <= 0:
        raise ValueError("weak quasinorm needs r > 0")
    v = np.abs(_values(g)).ravel()
    w = m.cell_mass.ravel()
    keep = (v > 0) & (w > 0)
    v, w = v[keep], w[keep]
    if v.size == 0:
        return 0.0
    order = np.argsort(-v, kind="stable")
    v, w = v[order], w[order]
    mass = np.cumsum(w)
    # last index of each run of equal values carries the full mass {|g| >= v}
    last = np.r_[v[1:] != v[:-1], True]
    return float(np.max(v[last] * mass[last] ** (1.0 / r)))


class KernelOperator:
    """Kernel ``K(x,y) = rho(x,y)/V(x,y)`` on all cell pairs of a grid.

    Distances come from :class:`DistanceMaps`.  Along coordinates on which no
    frame field depends the metric is translation invariant, so distances are
    computed once per representative source on a grid extended to all
    offsets in those coordinates; this also keeps paths from being clipped by
    the box in directions where the continuum domain is unbounded.  The
    diagonal cell uses ``rho = |h|/2`` and ``V = cell volume``.
    """

    def __init__(self, frame: Frame, grid: GridDomain,
                 params: ReachabilityParams = ReachabilityParams(),
                 use_symmetry: bool = True, batch: int = 256):
        if frame.N != grid.ndim:
            raise ValueError("frame and grid dimensions differ")
        self.frame, self.grid, self.params = frame, grid, params
        self.inv = frame.invariant_axes() if use_symmetry else ()
        shape = np.array(grid.shape)
        h = grid.spacing
        lo, hi = np.array(grid.lower), np.array(grid.upper)
        ext_shape = shape.copy()
        for i in self.inv:
            ext_shape[i] = 2 * shape[i] - 1
            # offsets -(n-1)..(n-1) relative to a source in cell 0
            lo[i] = grid.lower[i] - (shape[i] - 1) * h[i]
        self.ext = GridDomain(tuple(lo), tuple(hi), tuple(int(s) for s in ext_shape))
        self.rep_axes = tuple(i for i in range(grid.ndim) if i not in self.inv)
        rep_shape = tuple(int(shape[i]) for i in self.rep_axes)
        n_rep = int(np.prod(rep_shape)) if rep_shape else 1
        rep_idx = np.array(np.unravel_index(np.arange(n_rep), rep_shape)).T if rep_shape \
            else np.zeros((1, 0), dtype=int)
        src = np.zeros((n_rep, grid.ndim), dtype=int)
        for k, ax in enumerate(self.rep_axes):
            src[:, ax] = rep_idx[:, k]
        for ax in self.inv:
            src[:, ax] = shape[ax] - 1    # ext index of offset 0
        self._rep_shape = rep_shape
        sources = np.ravel_multi_index(src.T, self.ext.shape)

        rho = np.empty((n_rep, self.ext.size))
        vol = np.empty((n_rep, self.ext.size))
        for start in range(0, n_rep, batch):
            dm = DistanceMaps(frame, self.ext, sources[start:start + batch], params)
            rho[start:start + batch] = dm.rho
            for k in range(len(dm.sources)):
                r = dm.rho[k]
                v = np.full_like(r, np.inf)
                fin = np.isfinite(r)
                v[fin] = dm.volume(k, r[fin])
                vol[start + k] = v
        rho[np.arange(n_rep), sources] = 0.0
        vol[np.arange(n_rep), sources] = grid.cell_volume
        self.unreachable = int(np.sum(~np.isfinite(rho)))
        if self.unreachable:
            log.warning("%d unreachable cell pairs excluded from quadrature", self.unreachable)
        self.rho_table = rho            # raw distances, 0 at the source
        self.vol_table = vol
        with np.errstate(invalid="ignore", divide="ignore"):
            k = rho / vol
        k[~np.isfinite(k)] = 0.0
        self.diagonal = 0.5 * float(np.linalg.norm(h)) / grid.cell_volume
        k[np.arange(n_rep), sources] = self.diagonal
        self.kernel_table = k
        self._sources = sources

    def _gather(self, table: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Rows of ``table`` expanded to ``(len(xs), grid.size)`` for flat source indices ``xs``."""
        g = self.grid
        a = np.array(np.unravel_index(xs, g.shape)).T                   # (m, N)
        b = np.array(np.unravel_index(np.arange(g.size), g.shape)).T    # (C, N)
        if self.rep_axes:
            rep = np.ravel_multi_index(a[:, self.rep_axes].T, self._rep_shape)
        else:
            rep = np.zeros(len(xs), dtype=int)
        ext_idx = np.broadcast_to(b, (len(xs),) + b.shape).copy()    # (m, C, N)
        for ax in self.inv:
            ext_idx[..., ax] = g.shape[ax] - 1 + b[None, :, ax] - a[:, None, ax]
        flat = np.ravel_multi_index(np.moveaxis(ext_idx, -1, 0), self.ext.shape)
        return table[rep[:, None], flat]

    def rows(self, xs) -> np.ndarray:
        return self._gather(self.kernel_table, np.atleast_1d(xs))

    def distance_rows(self, xs) -> np.ndarray:
        """``rho(x, .)`` for each flat index in ``xs`` (zero at ``x`` itself)."""
        return self._gather(self.rho_table, np.atleast_1d(xs))

    def rho(self, x, y) -> float:
        return float(self._gather(self.rho_table, np.array([x]))[0, y])

    def V(self, x, y) -> float:
        return float(self._gather(self.vol_table, np.array([x]))[0, y])

    def kernel(self, x, y) -> float:
        return float(self._gather(self.kernel_table, np.array([x]))[0, y])

    def pair_tables(self, xs):
        xs = np.atleast_1d(xs)
        return self._gather(self.rho_table, xs), self._gather(self.vol_table, xs)

    def apply(self, F) -> np.ndarray:
        """``(T f)(x) = sum_y K(x,y) f(y) cellvol`` for one field or a stack of fields.

        ``F`` has shape ``grid.shape`` or ``(m, *grid.shape)``.  Along the
        invariant axes each representative's kernel slab is a correlation, so
        its rows are read off a sliding-window view instead of being gathered.
        """
        g = self.grid
        F = np.asarray(F, dtype=float)
        single = F.shape == g.shape
        F = F.reshape((-1,) + g.shape)
        m = F.shape[0]
        inv, rep = list(self.inv), list(self.rep_axes)
        n_inv = [g.shape[i] for i in inv]
        A = int(np.prod(n_inv)) if inv else 1
        # fields with rep axes first, then invariant axes: (m, B)
        Fb = np.transpose(F, [0] + [1 + i for i in rep] + [1 + i for i in inv]).reshape(m, -1)
        out = np.empty((m, len(self.kernel_table), A))
        for r, row in enumerate(self.kernel_table):
            slab = row.reshape(self.ext.shape)
            if inv:
                view = np.lib.stride_tricks.sliding_window_view(slab, n_inv, axis=inv)
                # start s = (n-1) - a_inv selects offsets b - a for target a
                view = view[tuple(slice(None, None, -1) if ax in inv else slice(None)
                                  for ax in range(g.ndim))]
                order = inv + rep + list(range(g.ndim, g.ndim + len(inv)))
                mat = np.transpose(view, order).reshape(A, -1)
            else:
                mat = slab.reshape(1, -1)
            out[:, r, :] = Fb @ mat.T
        rep_shape = [g.shape[i] for i in rep]
        out = out.reshape([m] + rep_shape + n_inv) * g.cell_volume
        back = np.argsort(rep + inv)
        out = np.transpose(out, [0] + [1 + int(i) for i in back])
        return out[0] if single else out


_OPERATORS: dict = {}


def kernel_operator(frame: Frame, grid: GridDomain,
                    params: ReachabilityParams = ReachabilityParams(),
                    use_symmetry: bool = True) -> KernelOperator:
    """Memoised :class:`KernelOperator` (one per frame, grid and params)."""
    key = (frame.fingerprint(), grid, params, use_symmetry)
    if key not in _OPERATORS:
        _OPERATORS[key] = KernelOperator(frame, grid, params, use_symmetry)
    return _OPERATORS[key]


def kernel_K(frame: Frame, x, y, grid: GridDomain,
             params: ReachabilityParams = ReachabilityParams()) -> tuple[float, bool]:
    """``(K(x, y), diagonal_flag)``."""
    op = kernel_operator(frame, grid, params)
    i, j = grid.flat_index(x), grid.flat_index(y)
    return op.kernel(i, j), i == j


def apply_T(frame: Frame, f, grid: GridDomain,
            params: ReachabilityParams = ReachabilityParams()) -> np.ndarray:
    return kernel_operator(frame, grid, params).apply(_values(f))


def lambda_factor(frame: Frame, I, grid: GridDomain) -> np.ndarray:
    Q = degree_QI(frame, I)
    return np.abs(lambda_grid(frame, I, grid.centers)) ** (1.0 / Q)


def apply_TI(frame: Frame, I, f, grid: GridDomain,
             params: ReachabilityParams = ReachabilityParams()) -> np.ndarray:
    """``|lambda_I|^{1/Q_I} T f``; stacks of fields broadcast."""
    return lambda_factor(frame, I, grid) * apply_T(frame, f, grid, params)


def _stack(testset: Sequence, grid: GridDomain) -> np.ndarray:
    if len(testset) == 0:
        raise ValueError("empty test set")
    return np.stack([np.asarray(_values(f), dtype=float).reshape(grid.shape) for f in testset])


def wpe_check(frame: Frame, I, p: float, testset: Sequence, grid: GridDomain,
              params: ReachabilityParams = ReachabilityParams(), bound: float = math.inf) -> dict:
    """Ratios ``||T_I f||_{p*} / ||f||_p`` (weak-type quasinorm at ``p = 1``)."""
    Q = degree_QI(frame, I)
    if not 1 <= p < Q:
        raise ValueError(f"p must be < Q_I (p={p}, Q_I={Q})")
    F = _stack(testset, grid)
    TF = apply_TI(frame, I, F, grid, params)
    leb = MeasureOnGrid.lebesgue(grid)
    target = Q / (Q - 1) if p == 1 else sobolev_exponent(p, Q)
    records = []
    for k, (f, tf) in enumerate(zip(F, TF)):
        den = lp_norm(f, p, leb)
        if den == 0:
            records.append({"index": k, "ratio": 0.0, "ignored": True})
            continue
        num = weak_quasinorm(tf, target, leb) if p == 1 else lp_norm(tf, target, leb)
        records.append({"index": k, "num": num, "den": den, "ratio": num / den, "ignored": False})
    live = [r["ratio"] for r in records if not r["ignored"]]
    max_ratio = max(live) if live else 0.0
    return {"check": "WPE", "I": list(I), "p": p, "target_exponent": target,
            "weak": p == 1, "records": records, "max_ratio": max_ratio,
            "pass": bool(max_ratio <= bound)}


def mpe_check(frame: Frame, I, testset: Sequence, grid: GridDomain,
              params: ReachabilityParams = ReachabilityParams(), bound: float = math.inf) -> dict:
    """Ratios ``||T f||_{weak-L^r(mu_I)} / ||f||_{L^1}`` with ``r = Q_I/(Q_I-1)``.

    Each record also carries the same ratio against Lebesgue measure, to show
    how the weight tames the kernel near the degenerate set.
    """
    Q = degree_QI(frame, I)
    if Q < 2:
        raise ValueError("mpe needs Q_I >= 2")
    r = Q / (Q - 1)
    F = _stack(testset, grid)
    TF = apply_T(frame, F, grid, params)
    mu = MeasureOnGrid.mu(frame, I, grid)
    leb = MeasureOnGrid.lebesgue(grid)
    records = []
    for k, (f, tf) in enumerate(zip(F, TF)):
        den = lp_norm(f, 1, leb)
        if den == 0:
            records.append({"index": k, "ratio": 0.0, "lebesgue_ratio": 0.0, "ignored": True})
            continue
        records.append({"index": k, "ratio": weak_quasinorm(tf, r, mu) / den,
                        "lebesgue_ratio": weak_quasinorm(tf, r, leb) / den, "ignored": False})
    live = [x for x in records if not x["ignored"]]
    max_ratio = max((x["ratio"] for x in live), default=0.0)
    max_leb = max((x["lebesgue_ratio"] for x in live), default=0.0)
    return {"check": "mPE", "I": list(I), "r": r, "records": records,
            "max_ratio": max_ratio, "max_lebesgue_ratio": max_leb,
            "lebesgue_exceeds": bool(max_leb > max_ratio), "pass": bool(max_ratio <= bound)}


def kernel_pointwise_check(frame: Frame, I, pairs, grid: GridDomain,
                           params: ReachabilityParams = ReachabilityParams(),
                           bound: float = math.inf) -> dict:
    """``max |lambda_I(x)|^{1/Q_I} (rho/V) / V^{1/Q_I - 1}`` over pairs with ``x != y``."""
    Q = degree_QI(frame, I)
    op = kernel_operator(frame, grid, params)
    lam = lambda_factor(frame, I, grid).ravel()
    records, skipped = [], 0
    for x, y in pairs:
        i, j = grid.flat_index(x), grid.flat_index(y)
        if i == j:
            skipped += 1
            continue
        rho, V = op.rho(i, j), op.V(i, j)
        if not (math.isfinite(rho) and math.isfinite(V)):
            skipped += 1
            continue
        ratio = lam[i] * (rho / V) / V ** (1.0 / Q - 1.0)
        records.append({"x": grid.center_of(np.unravel_index(i, grid.shape)).tolist(),
                        "y": grid.center_of(np.unravel_index(j, grid.shape)).tolist(),
                        "rho": rho, "V": V, "ratio": float(ratio)})
    max_ratio = max((r["ratio"] for r in records), default=0.0)
    return {"check": "kernel", "I": list(I), "records": records, "skipped": skipped,
            "max_ratio": max_ratio, "pass": bool(max_ratio <= bound)}


def delta_alpha_check(frame: Frame, y, alphas, grid: GridDomain,
                      params: ReachabilityParams = ReachabilityParams(),
                      tol: float = 0.15, min_cells: int = 16) -> dict:
    """Solve ``delta/|B(y,delta)| = alpha`` and compare ``{rho/V > alpha}`` with ``B(y, delta_alpha)``.

    Levels whose ball is smaller than ``min_cells`` cells or touches the grid
    boundary are skipped and flagged.
    """
    src = grid.flat_index(y)
    dm = DistanceMaps(frame, grid, [src], params)
    rho = dm.rho[0]
    fin = np.isfinite(rho)
    V = np.full_like(rho, np.inf)
    V[fin] = dm.volume(0, rho[fin])
    V[src] = grid.cell_volume
    with np.errstate(divide="ignore", invalid="ignore"):
        level = np.where(fin, rho / V, 0.0)
    level[src] = np.inf
    boundary = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.ndim):
        sl = [slice(None)] * grid.ndim
        sl[ax] = 0
        boundary[tuple(sl)] = True
        sl[ax] = -1
        boundary[tuple(sl)] = True
    boundary = boundary.ravel()

    def g(d):
        return d / dm.volume(0, d)[0]

    records = []
    d_hi = float(np.nanmax(rho[fin]))
    d_lo = float(np.min(rho[fin & (rho > 0)]))
    for alpha in alphas:
        rec = {"alpha": float(alpha)}
        if not g(d_hi) < alpha < g(d_lo):
            rec.update(skipped=True, reason="alpha outside resolvable range")
            records.append(rec)
            continue
        lo, hi = d_lo, d_hi
        for _ in range(100):
            mid = math.sqrt(lo * hi)
            if g(mid) > alpha:
                lo = mid
            else:
                hi = mid
            if hi / lo < 1 + 1e-10:
                break
        d_alpha = 0.5 * (lo + hi)
        ball = rho < d_alpha
        sup = level > alpha
        vol_ball = float(dm.volume(0, d_alpha)[0])
        if ball.sum() < min_cells or np.any(ball & boundary):
            rec.update(delta=d_alpha, skipped=True, reason="ball not resolved on grid")
            records.append(rec)
            continue
        symdiff = float(np.sum(ball ^ sup) * grid.cell_volume)
        rec.update(delta=d_alpha, ball_volume=vol_ball, symdiff=symdiff,
                   relative_symdiff=symdiff / vol_ball, skipped=False)
        records.append(rec)
    live = [r for r in records if not r["skipped"]]
    deltas = [r["delta"] for r in sorted(live, key=lambda r: r["alpha"])]
    monotone = all(a > b for a, b in zip(deltas, deltas[1:]))
    worst = max((r["relative_symdiff"] for r in live), default=0.0)
    return {"check": "delta_alpha", "records": records, "max_relative_symdiff": worst,
            "monotone": monotone, "tol": tol,
            "pass": bool(live) and monotone and worst <= tol}
