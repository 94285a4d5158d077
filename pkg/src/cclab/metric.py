"""Numerical control (Carnot-Caratheodory) metric on a cell grid.

Reachability is a minimum-time problem on the grid graph.  From cell ``c`` the
move to a stencil neighbour at physical offset ``v`` costs the least time ``t``
with ``v = t * sum_j a_j Y_j(c)`` and ``|a_j| <= delta^{d_j}``, i.e. the gauge
of ``v`` in the zonotope ``{sum_j a_j Y_j(c)}`` (coefficients frozen at the
source cell, as in an Euler step).  A cell is in the reachable set when its
shortest-path time is at most 1.  Costs decrease in ``delta`` for every edge,
so reachable sets are nested in ``delta`` exactly.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, asdict
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .fields import Frame, all_tuples, degree_QI, lambda_I
from .grid import GridDomain

log = logging.getLogger(__name__)

EPS_REL = 1e-9          # regularising axis generators, relative to cell size
INF = math.inf


@dataclass(frozen=True)
class ReachabilityParams:
    """Discretisation controls for reachability and distances.

    ``stencil`` is the neighbour radius in cells (moves to primitive lattice
    offsets with sup-norm <= stencil).  ``tol`` is the relative bracket width
    at which the distance bisection stops.  ``ladder`` is the number of
    geometric delta steps per octave used by distance maps.
    """

    stencil: int = 2
    tol: float = 1e-3
    max_iter: int = 40
    ladder: int = 4
    delta_min: float = 1e-4
    delta_max: float | None = None

    def __post_init__(self):
        if self.stencil < 1 or self.max_iter < 1 or self.ladder < 1:
            raise ValueError("stencil, max_iter and ladder must be positive")
        if self.tol <= 0 or self.delta_min <= 0:
            raise ValueError("tol and delta_min must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def stencil_offsets(ndim: int, radius: int) -> np.ndarray:
    rng = range(-radius, radius + 1)
    offs = [o for o in itertools.product(rng, repeat=ndim)
            if any(o) and math.gcd(*[abs(v) for v in o]) == 1]
    return np.array(offs, dtype=int)


def _generalized_cross(vectors: np.ndarray) -> np.ndarray:
    """Normal to ``N-1`` vectors in R^N; ``vectors`` has shape ``(..., N-1, N)``."""
    n = vectors.shape[-1]
    if n == 1:
        return np.ones(vectors.shape[:-2] + (1,))
    out = np.empty(vectors.shape[:-2] + (n,))
    for i in range(n):
        minor = np.delete(vectors, i, axis=-1)
        out[..., i] = (-1) ** i * np.linalg.det(minor)
    return out


class CellGraph:
    """Stencil graph of a grid with frame-dependent edge costs."""

    def __init__(self, frame: Frame, grid: GridDomain, params: ReachabilityParams):
        if frame.N != grid.ndim:
            raise ValueError("frame and grid dimensions differ")
        self.frame, self.grid, self.params = frame, grid, params
        N, q = frame.N, frame.q
        shape = np.array(grid.shape)
        h = grid.spacing
        self.degrees = frame.degrees.astype(float)

        centers = grid.flat_centers()
        Y = frame.values(centers)                                  # (C, q, N)
        eps = EPS_REL * h
        gens = np.concatenate([Y, np.broadcast_to(np.diag(eps), (len(centers), N, N))], axis=1)
        subsets = list(itertools.combinations(range(q + N), N - 1))
        normals = np.stack([_generalized_cross(gens[:, list(s), :]) for s in subsets], axis=1)
        norm = np.linalg.norm(normals, axis=-1, keepdims=True)
        scale = np.max(np.abs(gens), axis=(1, 2))[:, None, None] ** (N - 1)
        valid = norm > 1e-12 * np.maximum(scale, 1e-300)
        normals = np.where(valid, normals / np.where(valid, norm, 1.0), 0.0)   # (C, K, N)
        self._A = np.abs(np.einsum("ckn,cqn->ckq", normals, Y))                 # (C, K, q)
        self._Aeps = np.abs(normals) @ eps                                      # (C, K)
        self._Aeps = np.where(valid[..., 0], self._Aeps, 1.0)

        offs = stencil_offsets(N, params.stencil)
        idx = np.indices(grid.shape).reshape(N, -1).T                         # (C, N)
        src, dst, sid = [], [], []
        for s, o in enumerate(offs):
            tgt = idx + o
            ok = np.all((tgt >= 0) & (tgt < shape), axis=1)
            src.append(np.flatnonzero(ok))
            dst.append(np.ravel_multi_index(tgt[ok].T, grid.shape))
            sid.append(np.full(ok.sum(), s))
        self.src = np.concatenate(src)
        self.dst = np.concatenate(dst)
        sid = np.concatenate(sid)
        vphys = offs * h                                                        # (S, N)
        self._proj = np.abs(np.einsum("ekn,en->ek", normals[self.src], vphys[sid]))
        self.size = len(centers)

    def edge_times(self, delta: float) -> np.ndarray:
        """Travel time of every edge at control bound ``delta``."""
        if delta <= 0:
            raise ValueError("delta must be positive")
        support = self._A @ (delta ** self.degrees) + self._Aeps            # (C, K)
        return np.max(self._proj / support[self.src], axis=1)

    def graph(self, delta: float, limit: float) -> csr_matrix:
        w = self.edge_times(delta)
        keep = w <= limit
        return csr_matrix((w[keep], (self.src[keep], self.dst[keep])), shape=(self.size, self.size))

    def times(self, delta: float, sources, limit: float = 1.0) -> np.ndarray:
        """Minimal travel times from each source (rows) to every cell; ``inf`` beyond ``limit``."""
        g = self.graph(delta, limit)
        return dijkstra(g, directed=True, indices=np.atleast_1d(sources), limit=limit)


@lru_cache(maxsize=32)
def _cached_graph(frame_key, frame: Frame, grid: GridDomain, params: ReachabilityParams) -> CellGraph:
    return CellGraph(frame, grid, params)


def cell_graph(frame: Frame, grid: GridDomain, params: ReachabilityParams) -> CellGraph:
    return _cached_graph(frame.fingerprint(), frame, grid, params)


def _source_index(grid: GridDomain, x) -> int:
    return grid.flat_index(x)


def reachable_set(frame: Frame, x, delta: float, grid: GridDomain,
                  params: ReachabilityParams = ReachabilityParams()) -> np.ndarray:
    """Boolean mask (grid shape) of cells reachable from ``x`` in unit time."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    src = _source_index(grid, x)
    t = cell_graph(frame, grid, params).times(delta, src, limit=1.0)[0]
    return (t <= 1.0).reshape(grid.shape)


def _neighbour_spread(values: np.ndarray, shape) -> np.ndarray:
    """Largest finite difference to an axis neighbour, per cell."""
    v = values.reshape(shape)
    spread = np.zeros(shape)
    for ax in range(len(shape)):
        for shift in (1, -1):
            nb = np.roll(v, shift, axis=ax)
            edge = [slice(None)] * len(shape)
            edge[ax] = 0 if shift == 1 else -1
            with np.errstate(invalid="ignore"):
                d = np.abs(nb - v)
            d[tuple(edge)] = 0.0
            d[~np.isfinite(d)] = 0.0
            spread = np.maximum(spread, d)
    return spread.ravel()


def fractional_cells(level: np.ndarray, radius: float, shape, source: int | None = None) -> np.ndarray:
    """Partial-volume weights of the sublevel set ``{level < radius}``.

    Each cell counts ``clip(1/2 + (radius - level)/spread, 0, 1)``, where
    ``spread`` is the local change of ``level`` across one cell.  Removes the
    lattice ambiguity when ``radius`` lands exactly on a ring of cell centres.
    """
    spread = _neighbour_spread(level, shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(spread > 0, 0.5 + (radius - level) / spread,
                        np.where(level <= radius, 1.0, 0.0))
    frac = np.clip(np.nan_to_num(frac, nan=0.0, neginf=0.0), 0.0, 1.0)
    frac[~np.isfinite(level)] = 0.0
    if source is not None:
        frac[source] = 1.0
    return frac


def ball_volume(frame: Frame, x, delta: float, grid: GridDomain,
                params: ReachabilityParams = ReachabilityParams()) -> float:
    """Lebesgue measure of ``B(x, delta)`` on the grid (partial-volume cell count)."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    src = _source_index(grid, x)
    g = cell_graph(frame, grid, params)
    t = g.times(delta, src, limit=2.0)[0]
    frac = fractional_cells(t, 1.0, grid.shape, source=src)
    return float(frac.sum() * grid.cell_volume)


def default_delta_max(grid: GridDomain) -> float:
    return 4.0 * float(np.linalg.norm(np.array(grid.upper) - np.array(grid.lower)))


def cc_distance(frame: Frame, x, y, grid: GridDomain,
                params: ReachabilityParams = ReachabilityParams()) -> float:
    """``rho(x, y)`` by bisection on delta; ``inf`` if unreachable at the maximal delta."""
    g = cell_graph(frame, grid, params)
    src = _source_index(grid, x)
    tgt = _source_index(grid, y)
    if src == tgt:
        return 0.0
    hi = params.delta_max or default_delta_max(grid)
    lo = params.delta_min

    def hit(d):
        return g.times(d, src, limit=1.0)[0, tgt] <= 1.0

    if not hit(hi):
        return INF
    if hit(lo):
        return lo
    for _ in range(params.max_iter):
        if hi - lo < params.tol * hi:
            break
        mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if hit(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def V_of(frame: Frame, x, y, grid: GridDomain,
         params: ReachabilityParams = ReachabilityParams()) -> float:
    """``|B(x, rho(x, y))|``; the degenerate ball ``y == x`` is the cell of ``x``."""
    rho = cc_distance(frame, x, y, grid, params)
    if rho == 0.0:
        return grid.cell_volume
    if not math.isfinite(rho):
        return INF
    return ball_volume(frame, x, rho, grid, params)


class DistanceMaps:
    """``rho(source, .)`` on the whole grid for a batch of sources.

    Built from a geometric ladder of delta values; each cell's distance is
    interpolated log-log between the last ladder value that misses it and the
    first that reaches it.
    """

    def __init__(self, frame: Frame, grid: GridDomain, sources,
                 params: ReachabilityParams = ReachabilityParams()):
        self.frame, self.grid, self.params = frame, grid, params
        self.sources = np.atleast_1d(np.asarray(sources, dtype=int))
        g = cell_graph(frame, grid, params)
        ratio = 2.0 ** (1.0 / params.ladder)
        r_max = float(frame.degrees.max())
        limit = 1.05 * ratio ** r_max
        n_src = len(self.sources)
        rho = np.full((n_src, g.size), INF)
        rho[np.arange(n_src), self.sources] = 0.0
        prev = None
        delta = self._start_delta(g)
        d_max = params.delta_max or default_delta_max(grid)
        self.ladder_values = []
        while True:
            t = g.times(delta, self.sources, limit=limit)
            self.ladder_values.append(delta)
            newly = (t <= 1.0) & ~np.isfinite(rho)
            if prev is not None:
                tp = prev[newly]
                tn = t[newly]
                with np.errstate(divide="ignore", invalid="ignore"):
                    frac = np.log(tp) / (np.log(tp) - np.log(tn))
                frac = np.where(np.isfinite(frac) & (tn > 0), np.clip(frac, 0.0, 1.0), 1.0)
                rho[newly] = (delta / ratio) * ratio ** frac
            else:
                rho[newly] = delta
            if np.all(np.isfinite(rho)) or delta > d_max:
                break
            prev = t
            delta *= ratio
        self.rho = rho
        self._spread = None

    def _start_delta(self, g: CellGraph) -> float:
        delta = float(np.min(self.grid.spacing))
        for _ in range(200):
            t = g.times(delta, self.sources, limit=1.0)
            reached = np.isfinite(t).sum(axis=1)
            if np.all(reached <= 1) or delta <= self.params.delta_min:
                return delta
            delta *= 0.5
        return delta

    def volume(self, k: int, radius) -> np.ndarray:
        """Partial-volume measure of ``B(source_k, radius)`` for an array of radii."""
        radius = np.atleast_1d(np.asarray(radius, dtype=float))
        lo, hi, slope = self._ramps(k)
        return _ramp_sum(lo, hi, slope, radius) * self.grid.cell_volume

    def _ramps(self, k: int):
        if self._spread is None:
            self._spread = np.stack([_neighbour_spread(r, self.grid.shape) for r in self.rho])
        d = self.rho[k]
        s = self._spread[k]
        finite = np.isfinite(d)
        d, s = d[finite], s[finite]
        src_mask = d == 0.0
        s = np.where(s > 0, s, 1e-300)
        lo = d - 0.5 * s
        hi = d + 0.5 * s
        lo[src_mask] = -1.0
        hi[src_mask] = -0.5     # source cell always counts in full
        return lo, hi, 1.0 / s


def _ramp_sum(lo: np.ndarray, hi: np.ndarray, slope: np.ndarray, radius: np.ndarray) -> np.ndarray:
    """``sum_c clip((radius - lo_c) * slope_c, 0, 1)`` for many radii at once."""
    order_lo = np.argsort(lo)
    lo_s = lo[order_lo]
    c1_lo = np.concatenate([[0.0], np.cumsum(slope[order_lo])])
    c2_lo = np.concatenate([[0.0], np.cumsum((lo * slope)[order_lo])])
    order_hi = np.argsort(hi)
    hi_s = hi[order_hi]
    c1_hi = np.concatenate([[0.0], np.cumsum(slope[order_hi])])
    c2_hi = np.concatenate([[0.0], np.cumsum((lo * slope)[order_hi])])
    n_lo = np.searchsorted(lo_s, radius, side="right")
    n_hi = np.searchsorted(hi_s, radius, side="right")
    # cells with lo <= r < hi contribute (r - lo) * slope; cells with hi <= r contribute 1
    partial = (radius * (c1_lo[n_lo] - c1_hi[n_hi]) - (c2_lo[n_lo] - c2_hi[n_hi]))
    return n_hi + partial


def distance_map(frame: Frame, x, grid: GridDomain,
                 params: ReachabilityParams = ReachabilityParams()) -> np.ndarray:
    """``rho(x, .)`` for every cell, shaped like the grid."""
    dm = DistanceMaps(frame, grid, [_source_index(grid, x)], params)
    return dm.rho[0].reshape(grid.shape)


def reach_bound(frame: Frame, x, delta: float, iterations: int = 60, samples: int = 5) -> np.ndarray:
    """Half-widths of a box around ``x`` containing every unit-time trajectory.

    Fixed point of ``w_i = sum_j delta^{d_j} max_{box(w)} |Y_j^i|``, with the
    maximum taken over a ``samples^N`` lattice of the box.
    """
    x = np.asarray(x, dtype=float)
    N = frame.N
    d = frame.degrees.astype(float)
    coef = delta ** d
    w = np.zeros(N)
    unit = np.stack(np.meshgrid(*[np.linspace(-1, 1, samples)] * N, indexing="ij"), -1).reshape(-1, N)
    for _ in range(iterations):
        pts = x + unit * w
        vals = np.abs(frame.values(pts))                 # (P, q, N)
        new = np.einsum("q,qn->n", coef, vals.max(axis=0))
        if np.allclose(new, w, rtol=1e-6, atol=0):
            w = new
            break
        w = new
    return w


def adapted_grid(frame: Frame, x, delta: float, resolution: int = 65, margin: float = 1.15,
                 bounds: GridDomain | None = None) -> GridDomain:
    """Grid centred on ``x`` sized to contain ``B(x, delta)``.

    Directions in which the bound vanishes get the smallest nonzero half-width.
    With ``bounds`` the box is clipped to that domain (x stays a cell centre
    only if it is not clipped).
    """
    w = reach_bound(frame, x, delta) * margin
    pos = w[w > 0]
    floor = pos.min() if pos.size else delta
    w = np.where(w > 0, w, floor)
    grid = GridDomain.around(x, w, resolution)
    if bounds is not None:
        lo = np.maximum(grid.lower, bounds.lower)
        hi = np.minimum(grid.upper, bounds.upper)
        res = np.maximum(2, np.round(np.array(grid.shape) * (hi - lo) / (2 * w)).astype(int))
        grid = GridDomain(tuple(lo), tuple(hi), tuple(int(r) for r in res))
    return grid


def predicted_volume(frame: Frame, x, delta: float) -> float:
    """``max_J |lambda_J(x)| delta^{Q_J}`` over all N-tuples of the frame."""
    best = 0.0
    for J in all_tuples(frame):
        lam = abs(lambda_I(frame, J, x))
        if lam:
            best = max(best, lam * delta ** degree_QI(frame, J))
    return best


def nsw_ratio_check(frame: Frame, points, deltas, grid: GridDomain | None = None,
                    params: ReachabilityParams = ReachabilityParams(),
                    bound: float = 10.0, resolution: int = 65) -> dict:
    """Spread of ``|B(x,delta)| / max_J |lambda_J(x)| delta^{Q_J}`` over points and radii.

    Without ``grid`` each ball is measured on its own adapted grid.
    """
    points = [np.asarray(p, dtype=float) for p in points]
    deltas = [float(d) for d in deltas]
    if not points or not deltas:
        raise ValueError("empty point or delta list")
    records = []
    for x in points:
        for d in deltas:
            g = grid or adapted_grid(frame, x, d, resolution)
            xs = g.snap(x)
            vol = ball_volume(frame, xs, d, g, params)
            pred = predicted_volume(frame, xs, d)
            records.append({"x": xs.tolist(), "delta": d, "volume": vol,
                            "predicted": pred, "ratio": vol / pred if pred > 0 else INF})
    ratios = np.array([r["ratio"] for r in records])
    rmin, rmax = float(ratios.min()), float(ratios.max())
    spread = rmax / rmin if rmin > 0 else INF
    return {"records": records, "min": rmin, "max": rmax, "spread": spread,
            "bound": bound, "pass": bool(spread <= bound)}
