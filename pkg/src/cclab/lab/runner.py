"""Experiment orchestration.

Every experiment is a list of independent cases.  Case ``k`` draws its random
inputs from ``numpy.random.default_rng(seed + k)``, so the records do not
depend on how cases are spread over workers.  Summaries and verdicts are pure
functions of the records and parameters (:func:`summarize`).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .. import __version__, systems
from ..boman import build_boman_cover, verify_cover
from ..fields import check_homogeneous_type
from ..functions import (Dilation, TestFunction, dyadic_boxes, indicator_sweep,
                         polynomial_family)
from ..grid import GridDomain
from ..metric import (adapted_grid, ball_volume, cc_distance, nsw_ratio_check)
from ..potential import (delta_alpha_check, kernel_operator, kernel_pointwise_check, mpe_check,
                         wpe_check)
from ..sobolev import (domain_dimension, poincare_check, representation_check, sharpness_fit,
                       siq_ratio, truncation_sum_check, wsi_ratio)
from .config import LabConfig
from .report import ExperimentReport


def to_plain(obj):
    """JSON-ready copy: numpy scalars and arrays to Python, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def parallel_map(fn: Callable, items: Sequence, workers: int) -> list:
    """``[fn(x) for x in items]`` on a thread pool; output order follows ``items``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _rng(cfg: LabConfig, k: int) -> np.random.Generator:
    return np.random.default_rng((cfg.seed or 0) + k)


def _resolutions(cfg: LabConfig) -> list:
    return cfg.params.get("resolutions") or [cfg.example["resolution"]]


def _uniform(rng, grid: GridDomain, size=None):
    return rng.uniform(grid.lower, grid.upper, size=size)


def _origin(cfg: LabConfig, key: str):
    pt = cfg.params.get(key)
    if pt is not None:
        return [float(v) for v in pt]
    g = cfg.grid()
    return [0.5 * (lo + hi) for lo, hi in zip(g.lower, g.upper)]


# ---------------------------------------------------------------- families

def _family(cfg: LabConfig, grid: GridDomain):
    """Case list for the configured family, one entry per function."""
    fam = cfg.params["family"]
    kind = fam["kind"]
    N = grid.ndim
    if kind == "indicator_sweep":
        if "boxes" in fam:
            boxes = [(np.asarray(lo, float), np.asarray(hi, float)) for lo, hi in fam["boxes"]]
        else:
            mid = np.array(_origin(cfg, "center_point"))
            width = float(np.min(np.subtract(grid.upper, grid.lower)))
            sizes = fam.get("sizes") or [width / 4, width / 8, width / 16]
            offsets = fam.get("offsets") or [[-0.5] * N, [0.0] * N, [0.25] + [-0.5] * (N - 1)]
            boxes = dyadic_boxes(mid, sizes, offsets)
        return [("box", (lo.tolist(), hi.tolist())) for lo, hi in boxes]
    if kind == "bump":
        if "centers" in fam:
            radii = fam.get("radii", 0.3)
            rs = radii if isinstance(radii, list) and isinstance(radii[0], list) else [radii] * len(fam["centers"])
            polys = fam.get("polys", ["1"])
            return [("bump", (list(c), r, polys[k % len(polys)])) for k, (c, r) in enumerate(zip(fam["centers"], rs))]
        return [("random_bump", k) for k in range(int(fam.get("count", 10)))]
    return [("poly", t) for t in fam.get("texts", ["x1"])]


def _realize(cfg: LabConfig, case, grid: GridDomain, k: int):
    kind, arg = case
    fam = cfg.params["family"]
    if kind == "box":
        return indicator_sweep(grid, [arg])[0]
    if kind == "bump":
        c, r, poly = arg
        return TestFunction.bump(c, r, poly)
    if kind == "random_bump":
        # drawn against the coarsest domain so every resolution sees the same function
        rng = _rng(cfg, k)
        dom = cfg.grid()
        lo, hi = np.array(dom.lower), np.array(dom.upper)
        half = 0.5 * (hi - lo)
        a, b = fam.get("radius", [0.15, 0.4])
        r = rng.uniform(a, b, size=dom.ndim) * half
        c = rng.uniform(lo + r, hi - r)
        polys = fam.get("polys", ["1"])
        return TestFunction.bump(c.tolist(), r.tolist(), polys[k % len(polys)])
    return polynomial_family([arg], grid.ndim)[0]


def _describe(f) -> dict:
    if isinstance(f, TestFunction):
        d = {"poly": str(f.poly.as_expr())}
        if f.compact:
            d.update(center=list(f.center), radii=list(f.radii))
        return d
    return {"mass": float(np.sum(f))}


def _family_records(cfg: LabConfig, run: Callable) -> list:
    """``run(f, grid)`` over family members at every resolution."""
    out = []
    for res in _resolutions(cfg):
        grid = cfg.grid(res)
        cases = _family(cfg, grid)
        fs = [_realize(cfg, c, grid, k) for k, c in enumerate(cases)]
        _warm(cfg, grid)

        def one(k):
            rec = {"case": k, "resolution": res, **_describe(fs[k])}
            if cases[k][0] == "box":
                rec["box"] = list(cases[k][1])
            rec.update(run(fs[k], grid))
            return rec

        out.extend(parallel_map(one, list(range(len(fs))), cfg.workers))
    return out


def _warm(cfg: LabConfig, grid: GridDomain) -> None:
    """Build the shared distance operator once, before workers fan out."""
    if cfg.experiment in ("wpe", "mpe", "kernel", "representation"):
        kernel_operator(cfg.frame(), grid, cfg.reach_params())
    if cfg.experiment == "siq":
        domain_dimension(cfg.frame(), grid)


# ---------------------------------------------------------------- experiments

def _frame(cfg: LabConfig) -> list:
    fr = cfg.frame()
    return [{"index": i + 1, "label": e.label() if e.word else f"Y{i + 1}", "degree": e.degree,
             "field": e.field.to_strings()} for i, e in enumerate(fr.entries)]


def _hom_type(cfg: LabConfig) -> list:
    fr, grid, P = cfg.frame(), cfg.grid(), cfg.params
    pts = P["samples"] if P["samples"] is not None else \
        [_uniform(_rng(cfg, k), grid).tolist() for k in range(P["n_samples"])]

    def one(k):
        rep = check_homogeneous_type(fr, [pts[k]], P["rank_rtol"], P["residual_tol"])
        return {"case": k, "x": list(pts[k]), "rank": rep.ranks[0],
                "max_residual": rep.max_residual, "N": fr.N}

    return parallel_map(one, list(range(len(pts))), cfg.workers)


def _distance(cfg: LabConfig) -> list:
    fr, grid, P = cfg.frame(), cfg.grid(), cfg.params
    rp = cfg.reach_params()
    pairs = P["pairs"] if P["pairs"] is not None else \
        [_uniform(_rng(cfg, k), grid, (2, grid.ndim)).tolist() for k in range(P["n_pairs"])]
    euclid = cfg.example["name"] == "euclidean"

    def one(k):
        x, y = (grid.snap(v) for v in pairs[k])
        rho = cc_distance(fr, x, y, grid, rp)
        rec = {"case": k, "x": x.tolist(), "y": y.tolist(), "rho": rho}
        if euclid:
            ref = float(np.max(np.abs(x - y)))
            rec.update(reference=ref, rel_error=abs(rho - ref) / ref if ref > 0 else 0.0)
        return rec

    return parallel_map(one, list(range(len(pairs))), cfg.workers)


def _adapted_resolution(cfg: LabConfig, N: int) -> int:
    return cfg.params["adapted_resolution"] or (65 if N <= 2 else 33)


def _volume(cfg: LabConfig) -> list:
    fr, grid, P = cfg.frame(), cfg.grid(), cfg.params
    rp = cfg.reach_params()
    x = _origin(cfg, "point")
    res = _adapted_resolution(cfg, fr.N)

    def one(k):
        d = float(P["deltas"][k])
        g = adapted_grid(fr, x, d, res) if P["adapted"] else grid
        return {"case": k, "delta": d, "volume": ball_volume(fr, g.snap(x), d, g, rp)}

    return parallel_map(one, list(range(len(P["deltas"]))), cfg.workers)


def _nsw(cfg: LabConfig) -> list:
    fr, grid, P = cfg.frame(), cfg.grid(), cfg.params
    rp = cfg.reach_params()
    pts = P["points"] or ([[0.0, 0.0], [0.25, 0.0], [0.5, 0.0]] if fr.N == 2 else [[0.0] * fr.N])

    def one(x):
        rep = nsw_ratio_check(fr, [x], P["deltas"], None if P["adapted"] else grid, rp,
                              P["bound"], _adapted_resolution(cfg, fr.N))
        return [{k: r[k] for k in ("x", "delta", "volume", "predicted", "ratio")}
                for r in rep["records"]]

    return [r for rs in parallel_map(one, pts, cfg.workers) for r in rs]


def _wpe(cfg: LabConfig) -> list:
    fr, P, rp = cfg.frame(), cfg.params, cfg.reach_params()

    def run(f, grid):
        rep = wpe_check(fr, P["I"], P["p"], [f], grid, rp)
        return {k: v for k, v in rep["records"][0].items() if k != "index"}

    recs = _family_records(cfg, run)
    for res in _resolutions(cfg):
        recs.append({"kind": "delta_alpha", "resolution": res,
                     **_delta_alpha(cfg, cfg.grid(res))})
    return recs


def _delta_alpha(cfg: LabConfig, grid: GridDomain) -> dict:
    fr = cfg.frame()
    y = _origin(cfg, "center_point")
    op = kernel_operator(fr, grid, cfg.reach_params())
    lv = op.rows([grid.flat_index(y)])[0]
    lv = lv[np.isfinite(lv) & (lv > 0)]
    alphas = np.quantile(lv, [0.5, 0.7, 0.85]).tolist()
    rep = delta_alpha_check(fr, y, alphas, grid, cfg.reach_params())
    return {"max_relative_symdiff": rep["max_relative_symdiff"], "monotone": rep["monotone"],
            "levels": [r for r in rep["records"]], "delta_alpha_pass": rep["pass"]}


def _mpe(cfg: LabConfig) -> list:
    fr, P, rp = cfg.frame(), cfg.params, cfg.reach_params()

    def run(f, grid):
        rep = mpe_check(fr, P["I"], [f], grid, rp)
        return {k: v for k, v in rep["records"][0].items() if k != "index"}

    return _family_records(cfg, run)


def _kernel(cfg: LabConfig) -> list:
    fr, P, rp = cfg.frame(), cfg.params, cfg.reach_params()
    base = cfg.grid()
    pairs = P["pairs"] if P["pairs"] is not None else \
        [_uniform(_rng(cfg, k), base, (2, base.ndim)).tolist() for k in range(P["n_pairs"])]
    out = []
    for res in _resolutions(cfg):
        grid = cfg.grid(res)
        _warm(cfg, grid)

        def one(k):
            rep = kernel_pointwise_check(fr, P["I"], [pairs[k]], grid, rp)
            rec = {"case": k, "resolution": res, "x": list(pairs[k][0]), "y": list(pairs[k][1])}
            if rep["records"]:
                r = rep["records"][0]
                rec.update(rho=r["rho"], V=r["V"], ratio=r["ratio"], skipped=False)
            else:
                rec.update(skipped=True)
            return rec

        out.extend(parallel_map(one, list(range(len(pairs))), cfg.workers))
    return out


def _wsi(cfg: LabConfig) -> list:
    fr, P = cfg.frame(), cfg.params
    return _family_records(cfg, lambda f, g: wsi_ratio(fr, P["I"], P["p"], f, g))


def _siq(cfg: LabConfig) -> list:
    fr, P = cfg.frame(), cfg.params
    return _family_records(cfg, lambda f, g: siq_ratio(fr, P["p"], f, g))


def _truncation(cfg: LabConfig) -> list:
    fr, P = cfg.frame(), cfg.params

    def run(f, grid):
        rep = truncation_sum_check(fr, P["I"], f, grid, P["bound"])
        return {k: rep[k] for k in ("A", "B", "C", "D", "E", "r", "c_weak", "constant", "links",
                                    "sum_exact", "pass")}

    return _family_records(cfg, run)


def _sharpness(cfg: LabConfig) -> list:
    fr, P = cfg.frame(), cfg.params
    D = Dilation(tuple(P["dilation"]))
    b = P["bump"]
    c = b["center"] if b["center"] is not None else [0.0] * fr.N
    f = TestFunction.bump(c, b["radii"], b["poly"])
    rep = sharpness_fit(fr, D, f, float(P["p"]), float(P["q"]), P["deltas"],
                        resolution=P["zoom_resolution"])
    head = {k: rep[k] for k in ("slope", "theory", "Q", "p", "q", "p_star", "q_exceeds_p_star",
                                "truncated")}
    return [{"kind": "fit", **head}] + [{"kind": "delta", **r} for r in rep["records"]]


def _weight(cfg: LabConfig):
    if cfg.params.get("weight") == "vanishing":
        p = float(cfg.params["p"])
        return lambda pts: systems.vanishing_lambda_weight(pts, p)
    return None


def _poincare(cfg: LabConfig) -> list:
    fr, P, rp = cfg.frame(), cfg.params, cfg.reach_params()
    out = []
    for res in _resolutions(cfg):
        grid = cfg.grid(res)
        cover = build_boman_cover(fr, grid, float(P["tau"]), grid, rp)
        ver = verify_cover(cover)
        out.append({"kind": "cover", "resolution": res, "balls": len(cover.centers),
                    "M": cover.M, **cover.stats, "verify": ver})
        fs = [TestFunction.polynomial(t, fr.N) for t in P["functions"]]
        weight = _weight(cfg)

        def one(k):
            rep = poincare_check(fr, P["I"], P["p"], fs[k], cover, bound=P["bound"],
                                 doubling_bound=P["doubling_bound"], weight=weight)
            return {"kind": "function", "case": k, "resolution": res, "f": P["functions"][k],
                    "lhs": rep["lhs"], "rhs": rep["rhs"], "ratio": rep["ratio"],
                    "max_ball_ratio": rep["max_ball_ratio"], "jensen_ok": rep["jensen_ok"],
                    "doubling": rep["doubling"], "flags": rep["flags"]}

        out.extend(parallel_map(one, list(range(len(fs))), cfg.workers))
    return out


def _boman(cfg: LabConfig) -> list:
    fr, grid = cfg.frame(), cfg.grid()
    cover = build_boman_cover(fr, grid, float(cfg.params["tau"]), grid, cfg.reach_params())
    ver = verify_cover(cover)
    G = cover.grid
    recs = [{"kind": "cover", "balls": len(cover.centers), "M": cover.M, "central": cover.central,
             **cover.stats, "verify": ver}]
    for k in range(len(cover.centers)):
        recs.append({"kind": "ball", "ball": k,
                     "center": G.center_of(np.unravel_index(cover.centers[k], G.shape)).tolist(),
                     "radius": float(cover.radii[k]), "parent": cover.parents[k],
                     "chain_length": len(cover.chains[k])})
    return recs


def _representation(cfg: LabConfig) -> list:
    fr, P, rp = cfg.frame(), cfg.params, cfg.reach_params()
    c = _origin(cfg, "center")
    out = []
    for res in _resolutions(cfg):
        grid = cfg.grid(res)
        _warm(cfg, grid)
        fs = [TestFunction.polynomial(t, fr.N) for t in P["functions"]]

        def one(k):
            rep = representation_check(fr, fs[k], c, float(P["radius"]), grid, rp)
            return {"case": k, "resolution": res, "f": P["functions"][k], **rep}

        out.extend(parallel_map(one, list(range(len(fs))), cfg.workers))
    return out


RUNNERS: dict[str, Callable[[LabConfig], list]] = {
    "frame": _frame, "hom-type": _hom_type, "distance": _distance, "volume": _volume,
    "nsw": _nsw, "wpe": _wpe, "mpe": _mpe, "kernel": _kernel, "wsi": _wsi, "siq": _siq,
    "truncation": _truncation, "sharpness": _sharpness, "poincare": _poincare,
    "boman": _boman, "representation": _representation,
}


# ---------------------------------------------------------------- summaries

def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def refinement_summary(records: list, key: str = "ratio") -> dict:
    """Maximum of ``key`` per resolution and the relative drift between consecutive ones."""
    per: dict = {}
    for r in records:
        if key in r and not r.get("skipped") and not r.get("ignored"):
            per.setdefault(r.get("resolution"), []).append(r[key])
    maxima = {str(res): max(v) for res, v in per.items()}
    vals = list(maxima.values())
    drift = 0.0
    for a, b in zip(vals, vals[1:]):
        drift = max(drift, abs(b - a) / abs(a) if a else (0.0 if b == 0 else math.inf))
    return {"max": {k: v for k, v in maxima.items()}, "overall_max": max(vals, default=0.0),
            "drift": drift, "finite": all(_finite(v) for vs in per.values() for v in vs)}


def _bounded_family(records, P, key="ratio") -> tuple[dict, dict, bool]:
    s = refinement_summary(records, key)
    ok = s["finite"] and s["overall_max"] <= P["bound"] and s["drift"] <= P["drift_tol"]
    return s, {}, ok


def _fit_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def summarize(experiment: str, records: list, params: dict) -> tuple[dict, dict, bool]:
    """``(summary, invariants, pass)`` from records alone."""
    P = params
    if experiment == "frame":
        degs = [r["degree"] for r in records]
        return {"q": len(records), "max_degree": max(degs, default=0)}, {}, bool(records)
    if experiment == "hom-type":
        rank_ok = all(r["rank"] == r["N"] for r in records)
        res = max((r["max_residual"] for r in records), default=0.0)
        inv = {"rank": rank_ok, "bracket_closure": res <= P["residual_tol"]}
        return {"samples": len(records), "max_residual": res}, inv, all(inv.values())
    if experiment == "distance":
        fin = all(_finite(r["rho"]) for r in records)
        s = {"pairs": len(records), "max_rho": max((r["rho"] for r in records), default=0.0),
             "all_finite": fin}
        ok = fin
        if records and "rel_error" in records[0]:
            s["max_rel_error"] = max(r["rel_error"] for r in records)
            ok = ok and s["max_rel_error"] <= P["rel_tol"]
        return s, {}, ok
    if experiment == "volume":
        recs = [r for r in records if r["volume"] > 0]
        slope = _fit_slope([r["delta"] for r in recs], [r["volume"] for r in recs]) if len(recs) > 1 else math.nan
        s = {"slope": slope, "expected": P.get("expected_slope")}
        ok = _finite(slope) and (P.get("expected_slope") is None
                                 or abs(slope - P["expected_slope"]) <= P["slope_tol"])
        return s, {}, ok
    if experiment == "nsw":
        ratios = [r["ratio"] for r in records]
        lo, hi = min(ratios, default=0.0), max(ratios, default=0.0)
        spread = hi / lo if lo > 0 else math.inf
        return {"min": lo, "max": hi, "spread": spread}, {}, bool(records) and spread <= P["bound"]
    if experiment == "wpe":
        fam = [r for r in records if r.get("kind") != "delta_alpha"]
        da = [r for r in records if r.get("kind") == "delta_alpha"]
        s, _, ok = _bounded_family(fam, P)
        s["delta_alpha_max_symdiff"] = max((r["max_relative_symdiff"] for r in da), default=0.0)
        inv = {"delta_alpha": all(r["delta_alpha_pass"] for r in da)}
        return s, inv, ok
    if experiment == "mpe":
        s, _, ok = _bounded_family(records, P)
        s["lebesgue"] = refinement_summary(records, "lebesgue_ratio")
        return s, {}, ok
    if experiment in ("kernel", "wsi", "siq"):
        s, inv, ok = _bounded_family(records, P)
        if experiment == "kernel":
            s["skipped"] = sum(1 for r in records if r.get("skipped"))
        return s, inv, ok
    if experiment == "truncation":
        links: dict = {}
        for r in records:
            for name, v in r["links"].items():
                links[name] = links.get(name, True) and v
        inv = {"sum_exact": all(r["sum_exact"] for r in records),
               **{k: v for k, v in links.items() if k != "weak_constant<=bound"}}
        s = {"max_constant": max((r["constant"] for r in records), default=0.0),
             "max_c_weak": max((r["c_weak"] for r in records), default=0.0), "links": links}
        return s, inv, bool(records) and links.get("weak_constant<=bound", True)
    if experiment == "sharpness":
        fit = next(r for r in records if r.get("kind") == "fit")
        s = {k: fit[k] for k in ("slope", "theory", "p_star", "q_exceeds_p_star", "truncated")}
        s["error"] = abs(fit["slope"] - fit["theory"])
        ok = s["error"] <= P["slope_tol"] and (not fit["q_exceeds_p_star"] or fit["slope"] < 0)
        return s, {}, ok
    if experiment == "poincare":
        covers = [r for r in records if r.get("kind") == "cover"]
        fns = [r for r in records if r.get("kind") == "function"]
        glob = refinement_summary(fns, "ratio")
        ball = refinement_summary(fns, "max_ball_ratio")
        dbl_fail = sum(r["doubling"]["failures"] for r in fns)
        s = {"global": glob, "per_ball": ball,
             "doubling_max": max((r["doubling"]["max"] for r in fns), default=0.0),
             "doubling_failures": dbl_fail,
             "flags": sorted({f for r in fns for f in r["flags"]}
                             | ({"doubling failure"} if dbl_fail else set())),
             "M": [r["M"] for r in covers]}
        inv = {"cover": all(r["verify"]["pass"] for r in covers), "doubling": dbl_fail == 0,
               "jensen": all(r["jensen_ok"] for r in fns)}
        ok = (glob["finite"] and ball["finite"]
              and max(glob["overall_max"], ball["overall_max"]) <= P["bound"]
              and max(glob["drift"], ball["drift"]) <= P["drift_tol"])
        return s, inv, ok
    if experiment == "boman":
        c = next(r for r in records if r.get("kind") == "cover")
        s = {k: c[k] for k in ("balls", "M", "overlap", "covered_fraction", "max_chain")}
        return s, {k: c["verify"][k] for k in ("covers", "overlap", "containment", "links", "chains")}, \
            bool(c["verify"]["pass"])
    if experiment == "representation":
        cb = refinement_summary(records, "C_ball")
        cg = refinement_summary(records, "C_global")
        s = {"C_ball": cb, "C_global": cg, "clipped": any(r["clipped"] for r in records)}
        ok = (cb["finite"] and cg["finite"] and max(cb["overall_max"], cg["overall_max"]) <= P["bound"]
              and max(cb["drift"], cg["drift"]) <= P["drift_tol"])
        return s, {}, ok
    raise KeyError(experiment)


def curves(experiment: str, records: list) -> dict:
    """Named two-column series for plotting."""
    if experiment == "sharpness":
        pts = [r for r in records if r.get("kind") == "delta"]
        return {"log_delta_vs_log_ratio": [[math.log(r["delta"]), math.log(r["ratio"])] for r in pts]}
    if experiment == "volume":
        return {"log_delta_vs_log_volume": [[math.log(r["delta"]), math.log(r["volume"])]
                                            for r in records if r["volume"] > 0]}
    if experiment == "nsw":
        out: dict = {}
        for r in records:
            name = "log_delta_vs_log_ratio@" + ",".join(f"{v:g}" for v in r["x"])
            out.setdefault(name, []).append([math.log(r["delta"]), math.log(r["ratio"])])
        return out
    if experiment in ("wpe", "mpe", "kernel", "wsi", "siq"):
        out = {}
        for r in records:
            if "ratio" in r and "case" in r and not r.get("skipped"):
                out.setdefault(f"ratio@{r['resolution']}", []).append([r["case"], r["ratio"]])
        return out
    return {}


def run_experiment(cfg: LabConfig) -> ExperimentReport:
    """Run every case of ``cfg`` and assemble the report."""
    t0 = time.perf_counter()
    try:
        records = to_plain(RUNNERS[cfg.experiment](cfg))
    except (ValueError, ArithmeticError, IndexError) as e:
        raise type(e)(f"{cfg.experiment}: {e}") from e
    summary, invariants, passed = summarize(cfg.experiment, records, cfg.params)
    return ExperimentReport(
        experiment=cfg.experiment, config=to_plain(cfg.to_dict()), seed=cfg.seed,
        workers=cfg.workers, records=records, summary=to_plain(summary),
        invariants=to_plain(invariants), passed=bool(passed and all(invariants.values())),
        curves=to_plain(curves(cfg.experiment, records)), tool_version=__version__,
        wall_time=time.perf_counter() - t0)
