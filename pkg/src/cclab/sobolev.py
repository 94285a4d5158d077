"""Subelliptic gradients and the Sobolev, truncation, sharpness and Poincare harnesses."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fields import Frame, PolyVectorField, WeightSpec, degree_QI, max_nonisotropic_dim, \
    sobolev_exponent
from .functions import ComplexFunction, Dilation, TestFunction, dilate, field_derivatives
from .grid import GridDomain
from .metric import ReachabilityParams
from .potential import MeasureOnGrid, kernel_operator, weak_quasinorm


def _generators(frame_or_gens) -> Sequence[PolyVectorField]:
    if isinstance(frame_or_gens, Frame):
        if not frame_or_gens.generators:
            raise ValueError("frame carries no generators")
        return frame_or_gens.generators
    return list(frame_or_gens)


def grad_b(generators, f, grid: GridDomain, mode: str = "symbolic") -> np.ndarray:
    """``|grad_b f| = (sum_k |X_k f|^2)^{1/2}`` at cell centres."""
    d = field_derivatives(_generators(generators), f, grid, mode)
    return np.sqrt(np.sum(np.abs(d) ** 2, axis=0))


def _samples(f, grid: GridDomain) -> np.ndarray:
    return f.sample(grid) if hasattr(f, "sample") else np.asarray(f, dtype=float).reshape(grid.shape)


def _norm(values, p: float, density, cellvol: float) -> float:
    return float(np.sum(np.abs(values) ** p * density * cellvol) ** (1.0 / p))


def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0:
        return 0.0
    return lhs / rhs if rhs > 0 else math.inf


def wsi_ratio(frame: Frame, I, p: float, f, grid: GridDomain, mode: str = "symbolic") -> dict:
    """``(int |f|^{p*} w_{I,p})^{1/p*}`` against ``(int |grad_b f|^p + |f|^p)^{1/p}``."""
    spec = WeightSpec(frame, tuple(I), p)
    vals = _samples(f, grid)
    w = spec(grid.centers)
    lhs = _norm(vals, spec.p_star, w, grid.cell_volume)
    g = grad_b(frame, f, grid, mode)
    rhs = float(np.sum((g ** p + np.abs(vals) ** p) * grid.cell_volume) ** (1.0 / p))
    return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "p": p, "p_star": spec.p_star,
            "Q_I": spec.Q}


@lru_cache(maxsize=64)
def domain_dimension(frame: Frame, grid: GridDomain) -> int:
    """``sup Q(x)`` over cell centres and nodes of the closed box."""
    pts = np.concatenate([grid.flat_centers(), grid.nodes()])
    return max_nonisotropic_dim(frame, pts)


def siq_ratio(frame: Frame, p: float, f, grid: GridDomain, mode: str = "symbolic",
              Q: int | None = None) -> dict:
    """``||f||_{p*}`` against ``||grad_b f||_p + ||f||_p`` with ``1/p* = 1/p - 1/Q``."""
    Q = domain_dimension(frame, grid) if Q is None else Q
    if not 1 <= p < Q:
        raise ValueError(f"p must be < Q (p={p}, Q={Q})")
    ps = sobolev_exponent(p, Q)
    vals = _samples(f, grid)
    one = np.ones(grid.shape)
    lhs = _norm(vals, ps, one, grid.cell_volume)
    g = grad_b(frame, f, grid, mode)
    rhs = _norm(g, p, one, grid.cell_volume) + _norm(vals, p, one, grid.cell_volume)
    return {"lhs": lhs, "rhs": rhs, "ratio": _ratio(lhs, rhs), "p": p, "p_star": ps, "Q": Q}


# ---------------------------------------------------------------- representation

def representation_check(frame: Frame, f, center, radius: float, grid: GridDomain,
                         params: ReachabilityParams = ReachabilityParams(),
                         mode: str = "symbolic") -> dict:
    """Smallest constants in the two pointwise potential bounds.

    ``ball``: ``|f(x) - L(f,B)| <= C int_B K(x,y) |grad_b f(y)| dy`` for ``x`` in ``B``,
    with ``L(f,B)`` the Lebesgue cell average over ``B``.
    ``global``: ``|f(x)| <= C int K(x,y) (|grad_b f| + |f|)(y) dy`` for every cell.
    """
    if radius <= 0:
        raise ValueError("degenerate ball")
    op = kernel_operator(frame, grid, params)
    c = grid.flat_index(center)
    ball = (op.distance_rows([c])[0] < radius).reshape(grid.shape)
    vals = _samples(f, grid)
    g = grad_b(frame, f, grid, mode)
    L = float(vals[ball].mean())
    lhs = np.abs(vals - L)[ball]
    rhs = op.apply(np.where(ball, g, 0.0))[ball]
    with np.errstate(divide="ignore", invalid="ignore"):
        r_ball = np.where(lhs == 0, 0.0, lhs / rhs)
        rhs2 = op.apply(g + np.abs(vals))
        r_glob = np.where(vals == 0, 0.0, np.abs(vals) / rhs2)
    edge = np.zeros(grid.shape, dtype=bool)
    for ax in range(grid.ndim):
        edge[(slice(None),) * ax + (0,)] = True
        edge[(slice(None),) * ax + (-1,)] = True
    return {"C_ball": float(np.max(r_ball, initial=0.0)),
            "C_global": float(np.max(r_glob, initial=0.0)),
            "average": L, "cells": int(ball.sum()), "clipped": bool(np.any(ball & edge))}


# ---------------------------------------------------------------- truncation

def level_range(values) -> tuple[int, int]:
    """``(j_lo, j_hi)`` with ``2^{j_lo} <= min |f| > 0`` and ``max |f| <= 2^{j_hi}``."""
    a = np.abs(np.asarray(values))
    nz = a[a > 0]
    if nz.size == 0:
        return 0, 0
    return int(math.floor(math.log2(nz.min()))), int(math.ceil(math.log2(nz.max())))


_J_FLOOR = int(np.log2(np.finfo(float).smallest_subnormal)) + 1


def truncation_levels(f, j_range: Sequence[int]) -> tuple[dict, np.ndarray]:
    """Truncations ``f_j = clip(|f| - 2^{j-1}, 0, 2^{j-1})`` for consecutive ``j``.

    Also returns the tail ``min(|f|, 2^{j_min - 1})``, which is the sum of all
    levels below ``j_min``; the tail plus the listed levels add up to ``|f|``
    exactly in floating point when the sum runs upward in ``j``.
    """
    a = np.abs(np.asarray(f))
    js = list(j_range)
    if js != list(range(js[0], js[0] + len(js))):
        raise ValueError("j_range must be consecutive")
    # levels whose half-threshold underflows cannot be represented; their mass stays in the tail
    start = max(js[0], _J_FLOOR)
    levels = {j: np.clip(a - 2.0 ** (j - 1), 0.0, 2.0 ** (j - 1)) if j >= start else np.zeros_like(a)
              for j in js}
    tail = np.minimum(a, 2.0 ** (start - 1))
    return levels, tail


def level_sum(levels: dict, tail: np.ndarray) -> np.ndarray:
    total = tail.copy()
    for j in sorted(levels):
        total = total + levels[j]
    return total


def gradient_masks(f, j_range: Sequence[int]) -> dict:
    """Cells where ``grad_b f_j`` may be nonzero: ``2^{j-1} < |f| < 2^j``."""
    a = np.abs(np.asarray(f))
    return {j: (a > 2.0 ** (j - 1)) & (a < 2.0 ** j) for j in j_range}


def abs_gradient(generators, f, grid: GridDomain, mode: str = "symbolic") -> tuple[np.ndarray, np.ndarray]:
    """``(|grad_b |f||, |grad_b f|)`` where ``f != 0`` (zero elsewhere).

    For complex ``f``, ``X|f| = Re(conj(f) Xf)/|f|`` since the fields are real.
    """
    d = field_derivatives(_generators(generators), f, grid, mode)
    vals = _samples(f, grid) if not isinstance(f, ComplexFunction) else f.sample(grid)
    mod = np.abs(vals)
    nz = mod > 0
    safe = np.where(nz, mod, 1.0)
    dabs = np.real(np.conj(vals)[None] * d) / safe[None]
    g_abs = np.where(nz, np.sqrt(np.sum(dabs ** 2, axis=0)), 0.0)
    g = np.where(nz, np.sqrt(np.sum(np.abs(d) ** 2, axis=0)), 0.0)
    return g_abs, g


def truncation_sum_check(frame: Frame, I, f, grid: GridDomain, bound: float = math.inf,
                         mode: str = "symbolic") -> dict:
    """Evaluate every link of the level-set chain for ``r = Q_I/(Q_I-1)``.

    ``A = int |f|^r dmu_I``
    ``B = sum_j 2^{(j+1)r} mu{2^j < |f| <= 2^{j+1}}``       (``A <= B``)
    ``C = sum_j 2^{(j+1)r} mu{f_j >= 2^{j-1}}``              (``B <= C``)
    ``D = sum_j 4^r (G_j + F_j)^r`` with ``G_j`` the gradient mass on
    ``{2^{j-1} < |f| < 2^j}`` and ``F_j = ||f_j||_1``; ``C <= c_w D`` where
    ``c_w`` is the largest per-level weak-type constant
    ``||f_j||_{weak L^r(mu)}^r / (G_j + F_j)^r``
    ``E = (||grad_b f||_1 + ||f||_1)^r``                       (``D <= 4^r E``)

    The strict superlevel set ``{f_j > 2^{j-1}}`` is empty because
    ``f_j <= 2^{j-1}``, so ``C`` uses ``>=``, which contains ``{|f| > 2^j}``.
    Only levels meeting the range of ``|f|`` contribute to ``B``; ``C`` and
    ``D`` run over the same finite range, so each link compares like terms.
    """
    Q = degree_QI(frame, tuple(I))
    if Q < 2:
        raise ValueError("needs Q_I >= 2")
    r = Q / (Q - 1)
    mu = MeasureOnGrid.mu(frame, tuple(I), grid)
    mass = mu.cell_mass
    cv = grid.cell_volume
    g_abs, g = abs_gradient(frame, f, grid, mode)
    vals = np.abs(f.sample(grid) if hasattr(f, "sample") else np.asarray(f))
    lo, hi = level_range(vals)
    js = list(range(lo - 1, hi + 1))
    levels, tail = truncation_levels(vals, js)
    A = float(np.sum(vals ** r * mass))
    B = C = D = 0.0
    per_level = []
    for j in js:
        band = (vals > 2.0 ** j) & (vals <= 2.0 ** (j + 1))
        B += 2.0 ** ((j + 1) * r) * float(mass[band].sum())
        fj = levels[j]
        top = fj >= 2.0 ** (j - 1)
        mu_top = float(mass[top].sum())
        C += 2.0 ** ((j + 1) * r) * mu_top
        G = float(np.sum(g[(vals > 2.0 ** (j - 1)) & (vals < 2.0 ** j)]) * cv)
        F = float(np.sum(fj) * cv)
        D += 4.0 ** r * (G + F) ** r
        weak = weak_quasinorm(fj, r, mu) if F > 0 else 0.0
        c_j = weak ** r / (G + F) ** r if G + F > 0 else 0.0
        per_level.append({"j": j, "mu_top": mu_top, "G": G, "F": F, "weak": weak, "c": c_j})
    c_w = max((lv["c"] for lv in per_level), default=0.0)
    E = float((np.sum(g) * cv + np.sum(vals) * cv) ** r)
    tol = 1e-12
    nz = vals > 0
    links = {
        "A<=B": A <= B * (1 + tol),
        "B<=C": B <= C * (1 + tol),
        "C<=cD": C <= c_w * D * (1 + tol),
        "D<=4^rE": D <= 4.0 ** r * E * (1 + tol),
        "grad_abs<=grad": bool(np.all(g_abs[nz] <= g[nz] * (1 + 1e-12) + 1e-300)),
        "weak_constant<=bound": c_w <= bound,
    }
    return {"A": A, "B": B, "C": C, "D": D, "E": E, "r": r, "c_weak": c_w,
            "constant": A / E if E > 0 else 0.0, "levels": per_level, "links": links,
            "sum_exact": bool(np.array_equal(level_sum(levels, tail), vals)),
            "pass": bool(all(links.values()))}


# ---------------------------------------------------------------- sharpness

def sharpness_fit(frame: Frame, D: Dilation, f: TestFunction, p: float, q: float,
                  deltas: Sequence[float], grid: GridDomain | None = None,
                  resolution: int = 96, zoom: bool = True, min_cells: int = 8,
                  mode: str = "symbolic") -> dict:
    """Slope of ``log ||f_delta||_q / (||grad_b f_delta||_p + ||f_delta||_p)`` against ``log delta``.

    With ``zoom`` each ``f_delta`` is sampled on a grid covering its support
    at fixed resolution.  Otherwise ``grid`` is used and deltas whose support
    spans fewer than ``min_cells`` cells along some axis are dropped and the
    report is flagged.
    """
    if q <= 0:
        raise ValueError("q must be positive")
    ds = [float(d) for d in deltas]
    if any(b >= a for a, b in zip(ds, ds[1:])):
        raise ValueError("deltas must decrease")
    gens = _generators(frame)
    D.validate(gens)
    Q = D.Q
    records, truncated = [], False
    for d in ds:
        fd = dilate(f, D, d)
        lo, hi = fd.support_box()
        if zoom:
            g = GridDomain.box(lo, hi, resolution)
        else:
            if grid is None:
                raise ValueError("a grid is required without zoom")
            if np.any((hi - lo) / grid.spacing < min_cells):
                truncated = True
                continue
            g = grid
        vals = fd.sample(g)
        one = np.ones(g.shape)
        num = _norm(vals, q, one, g.cell_volume)
        gb = grad_b(gens, fd, g, mode)
        den = _norm(gb, p, one, g.cell_volume) + _norm(vals, p, one, g.cell_volume)
        records.append({"delta": d, "num": num, "den": den, "ratio": num / den})
    if len(records) < 2:
        raise ValueError("fewer than two resolvable deltas")
    x = np.log([rec["delta"] for rec in records])
    y = np.log([rec["ratio"] for rec in records])
    slope = float(np.polyfit(x, y, 1)[0])
    theory = Q / q - Q / p + 1
    p_star = sobolev_exponent(p, Q) if p < Q else math.inf
    return {"slope": slope, "theory": theory, "Q": Q, "p": p, "q": q, "p_star": p_star,
            "q_exceeds_p_star": bool(q > p_star), "records": records, "truncated": truncated}


# ---------------------------------------------------------------- Poincare

def weighted_average(f, w: MeasureOnGrid, domain=None) -> float:
    """``int f w / int w`` over a boolean ``domain`` mask (whole grid by default)."""
    vals = f.sample(w.grid) if hasattr(f, "sample") else np.asarray(f, dtype=float)
    mask = np.ones(w.grid.shape, dtype=bool) if domain is None else np.asarray(domain, dtype=bool)
    m = w.cell_mass * mask
    total = float(m.sum())
    if total <= 0:
        raise ValueError("zero total weight")
    # centred on a sample so constants come back exactly
    ref = float(vals[mask].flat[0]) if mask.any() else 0.0
    return ref + float(np.sum((vals - ref) * m) / total)


def _weight_density(frame, I, p, grid, weight):
    if weight is not None:
        return np.asarray(weight(grid.centers), dtype=float)
    return WeightSpec(frame, tuple(I), p)(grid.centers)


def doubling_ratios(cover, density: np.ndarray) -> np.ndarray:
    """``|2B|_w / |B|_w`` for every cover ball (``inf`` when ``|B|_w = 0``)."""
    mass = density.ravel() * cover.grid.cell_volume
    out = np.empty(len(cover.centers))
    for k in range(len(cover.centers)):
        row = cover.row(k)
        small = float(mass[row < cover.radii[k]].sum())
        big = float(mass[row < 2 * cover.radii[k]].sum())
        out[k] = big / small if small > 0 else math.inf
    return out


def poincare_check(frame: Frame, I, p: float, f, cover, mode: str = "symbolic",
                   bound: float = math.inf, doubling_bound: float = 64.0,
                   weight=None) -> dict:
    """Global weighted Poincare ratio on the cover's domain plus the per-ball ratios.

    ``weight`` optionally replaces ``w_{I,p}`` by a callable on points (for
    weights that do not come from a polynomial frame); its ``Q_I`` is still
    taken from ``I``.
    """
    Q = degree_QI(frame, tuple(I))
    if not 1 <= p < Q:
        raise ValueError(f"p must be < Q_I (p={p}, Q_I={Q})")
    ps = sobolev_exponent(p, Q)
    grid = cover.grid
    dom = cover.covered
    w = _weight_density(frame, I, p, grid, weight)
    wm = MeasureOnGrid(grid, w)
    vals = f.sample(grid) if hasattr(f, "sample") else np.asarray(f, dtype=float)
    g = grad_b(frame, f, grid, mode)
    cv = grid.cell_volume
    rhs = float(np.sum(g[dom] ** p) * cv) ** (1.0 / p)

    f_avg = weighted_average(vals, wm, dom) if float((w * dom).sum()) > 0 else math.nan
    flags = []
    if math.isnan(f_avg):
        flags.append("zero total weight")
        lhs = math.nan
    else:
        lhs = float(np.sum(np.abs(vals - f_avg)[dom] ** ps * w[dom]) * cv) ** (1.0 / ps)
    ratio = _ratio(lhs, rhs) if not math.isnan(lhs) else math.nan

    # the average may replace any constant A: |f_avg - A| <= (int |f-A|^{p*} w / int w)^{1/p*}
    jensen = []
    if not math.isnan(f_avg):
        W = float(np.sum(w[dom]) * cv)
        for A in (0.0, float(vals[dom].min()), float(vals[dom].max()), float(np.median(vals[dom]))):
            right = (float(np.sum(np.abs(vals - A)[dom] ** ps * w[dom]) * cv) / W) ** (1.0 / ps)
            jensen.append({"A": A, "left": abs(f_avg - A), "right": right,
                           "ok": abs(f_avg - A) <= right * (1 + 1e-12) + 1e-15})

    balls = []
    for k in range(len(cover.centers)):
        B = cover.ball_mask(k).reshape(grid.shape) & dom
        L = float(vals[B].mean())
        bl = float(np.sum(np.abs(vals - L)[B] ** ps * w[B]) * cv) ** (1.0 / ps)
        br = float(np.sum(g[B] ** p) * cv) ** (1.0 / p)
        if br == 0 and bl > 0:
            flags.append(f"ball {k}: zero gradient on nonconstant samples")
        balls.append({"ball": k, "lhs": bl, "rhs": br, "ratio": _ratio(bl, br),
                      "cells": int(B.sum())})
    dbl = doubling_ratios(cover, w.reshape(grid.shape))
    max_dbl = float(dbl.max(initial=0.0))
    doubling_ok = bool(np.all(np.isfinite(dbl)) and max_dbl <= doubling_bound)
    max_ball = max((b["ratio"] for b in balls), default=0.0)
    finite = math.isfinite(ratio) and math.isfinite(max_ball)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "average": f_avg, "p_star": ps,
            "balls": balls, "max_ball_ratio": max_ball, "jensen": jensen,
            "jensen_ok": all(j["ok"] for j in jensen) and bool(jensen),
            "doubling": {"max": max_dbl, "bound": doubling_bound, "ok": doubling_ok,
                         "failures": int(np.sum(~np.isfinite(dbl) | (dbl > doubling_bound)))},
            "flags": flags,
            "pass": bool(finite and ratio <= bound and max_ball <= bound and doubling_ok)}
