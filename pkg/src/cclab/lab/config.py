"""Experiment configuration: parsing, defaults and validation."""

from __future__ import annotations

import copy
import json
import re
from dataclasses import dataclass, field
from typing import Any

import yaml

from .. import systems
from ..fields import Frame, degree_QI
from ..grid import GridDomain
from ..metric import ReachabilityParams
from ..poly import PolynomialSyntaxError

EXPERIMENTS = ("frame", "hom-type", "distance", "volume", "nsw", "wpe", "mpe", "kernel", "wsi",
               "siq", "truncation", "sharpness", "poincare", "boman", "representation")

# experiment -> defaults for its parameter block
DEFAULTS: dict[str, dict[str, Any]] = {
    "frame": {},
    "hom-type": {"samples": None, "n_samples": 32, "rank_rtol": 1e-9, "residual_tol": 1e-8},
    "distance": {"pairs": None, "n_pairs": 20, "rel_tol": 0.05},
    "volume": {"point": None, "deltas": [0.015625, 0.03125, 0.0625, 0.125, 0.25],
               "adapted": True, "adapted_resolution": None, "expected_slope": None, "slope_tol": 0.15},
    "nsw": {"points": None, "deltas": [0.015625, 0.03125, 0.0625, 0.125, 0.25, 0.5],
            "bound": 10.0, "adapted": True, "adapted_resolution": None},
    "wpe": {"I": None, "p": 1.0, "center_point": None, "family": {"kind": "indicator_sweep"}, "bound": 100.0,
            "resolutions": None, "drift_tol": 0.2},
    "mpe": {"I": None, "center_point": None, "family": {"kind": "indicator_sweep"}, "bound": 100.0,
            "resolutions": None, "drift_tol": 0.2},
    "kernel": {"I": None, "pairs": None, "n_pairs": 40, "bound": 100.0,
               "resolutions": None, "drift_tol": 0.2},
    "wsi": {"I": None, "p": 1.0, "family": {"kind": "bump", "count": 10}, "bound": 100.0,
            "resolutions": None, "drift_tol": 0.2},
    "siq": {"p": 1.0, "family": {"kind": "bump", "count": 10}, "bound": 100.0,
            "resolutions": None, "drift_tol": 0.2},
    "truncation": {"I": None, "family": {"kind": "bump", "count": 4}, "bound": 100.0},
    "sharpness": {"dilation": None, "p": 1.0, "q": None,
                  "deltas": [0.125, 0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125],
                  "bump": {"center": None, "radii": 0.5, "poly": "1"}, "zoom_resolution": 96,
                  "slope_tol": 0.1},
    "poincare": {"I": None, "p": 1.0, "tau": 2.0, "functions": ["x1", "x2"], "weight": None,
                 "bound": 100.0, "doubling_bound": 64.0, "resolutions": None, "drift_tol": 0.2},
    "boman": {"tau": 2.0},
    "representation": {"center": None, "radius": 0.5, "functions": ["x1"], "bound": 1000.0,
                       "resolutions": None, "drift_tol": 0.2},
}

SAMPLING = {"hom-type": "samples", "distance": "pairs", "kernel": "pairs"}
FAMILY_KINDS = ("indicator_sweep", "bump", "polynomial")
WEIGHT_OVERRIDES = ("vanishing",)


class ConfigError(ValueError):
    """All schema violations of a configuration."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class LabConfig:
    experiment: str
    example: dict
    params: dict
    reach: dict = field(default_factory=dict)
    seed: int | None = None
    workers: int = 1

    def system(self) -> systems.System:
        ex = self.example
        if ex["name"] == "custom":
            return systems.custom(ex["generators"], ex.get("r", 1), dilation=ex.get("dilation"))
        return systems.get(ex["name"], r=ex.get("r"), n=ex.get("n"))

    def frame(self) -> Frame:
        return self.system().frame()

    @property
    def N(self) -> int:
        return self.system().N

    def grid(self, resolution=None) -> GridDomain:
        dom = self.example["domain"]
        return GridDomain.box(dom["lower"], dom["upper"], resolution or self.example["resolution"])

    def reach_params(self) -> ReachabilityParams:
        return ReachabilityParams(**self.reach)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "example": copy.deepcopy(self.example),
                "params": copy.deepcopy(self.params), "reach": dict(self.reach),
                "seed": self.seed, "workers": self.workers}


def _default_example(name: str) -> dict:
    if name == "heisenberg":
        return {"domain": {"lower": [-1, -1, -1], "upper": [1, 1, 1]}, "resolution": 48}
    return {"resolution": 128}


def _normalize_example(raw, errors: list[str]) -> dict:
    if not isinstance(raw, dict):
        errors.append("example must be a mapping")
        return {}
    ex = dict(raw)
    name = str(ex.get("name", "")).lower()
    if name.startswith("euclid"):
        name = "euclidean"
    elif name.startswith("grushin"):
        name = "grushin"
    if name not in ("euclidean", "grushin", "heisenberg", "custom"):
        errors.append(f"unknown example {raw.get('name')!r}")
        return ex
    ex["name"] = name
    if name == "grushin":
        ex.setdefault("r", 2)
    if name == "euclidean":
        ex.setdefault("n", 2)
    if name == "custom":
        gens = ex.get("generators")
        if not gens or not isinstance(gens, list):
            errors.append("custom example needs a list of generators")
            return ex
        ex.setdefault("r", 1)
        try:
            systems.custom(gens, ex["r"])
        except PolynomialSyntaxError as e:
            errors.append(f"malformed polynomial: {e}")
            return ex
        except ValueError as e:
            errors.append(f"bad generators: {e}")
            return ex
    for k, v in _default_example(name).items():
        ex.setdefault(k, v)
    n = {"euclidean": ex.get("n", 2), "grushin": 2, "heisenberg": 3}.get(
        name, len(ex.get("generators", [[0]])[0]))
    ex.setdefault("domain", {"lower": [-1.0] * n, "upper": [1.0] * n})
    dom = ex["domain"]
    if not isinstance(dom, dict) or len(dom.get("lower", [])) != n or len(dom.get("upper", [])) != n:
        errors.append(f"domain must give lower and upper corners of length {n}")
    elif any(float(h) <= float(lo) for lo, h in zip(dom["lower"], dom["upper"])):
        errors.append("domain upper must exceed lower")
    res = ex.get("resolution")
    if isinstance(res, list):
        if len(res) != n or any(int(r) < 2 for r in res):
            errors.append("resolution must be >= 2 per axis")
    elif not isinstance(res, int) or res < 2:
        errors.append("resolution must be an integer >= 2")
    return ex


def _check_I(cfg: LabConfig, frame: Frame, errors: list[str]):
    I = cfg.params.get("I")
    if I is None:
        errors.append(f"{cfg.experiment}: missing required key 'I'")
        return None
    if not isinstance(I, (list, tuple)) or len(I) != frame.N:
        errors.append(f"I must list {frame.N} indices")
        return None
    if any(not isinstance(i, int) or not 1 <= i <= frame.q for i in I):
        errors.append(f"I indices must lie in [1, {frame.q}]")
        return None
    return degree_QI(frame, tuple(I))


def _validate(cfg: LabConfig, errors: list[str]) -> None:
    P = cfg.params
    try:
        frame = cfg.frame()
    except Exception as e:     # bracket generation on malformed custom input
        errors.append(f"cannot build frame: {e}")
        return
    uses_I = cfg.experiment in ("wpe", "mpe", "kernel", "wsi", "truncation", "poincare")
    Q_I = _check_I(cfg, frame, errors) if uses_I else None
    p = P.get("p")
    if p is not None and (not isinstance(p, (int, float)) or p < 1):
        errors.append("p must be a number >= 1")
        p = None
    if Q_I is not None and p is not None and cfg.experiment in ("wpe", "wsi", "poincare") \
            and not p < Q_I:
        errors.append(f"p must be < Q_I (p={p}, Q_I={Q_I})")
    if Q_I is not None and cfg.experiment in ("mpe", "truncation") and Q_I < 2:
        errors.append(f"{cfg.experiment} needs Q_I >= 2 (Q_I={Q_I})")
    fam = P.get("family")
    if fam is not None:
        if not isinstance(fam, dict) or fam.get("kind") not in FAMILY_KINDS:
            errors.append(f"family.kind must be one of {', '.join(FAMILY_KINDS)}")
    if cfg.experiment == "sharpness":
        if P.get("q") is None:
            errors.append("sharpness: missing required key 'q'")
        dil = P.get("dilation") or cfg.system().dilation
        if dil is None:
            errors.append("sharpness needs an exact dilation for this example")
        else:
            P["dilation"] = list(dil)
        ds = P.get("deltas") or []
        if len(ds) < 2 or any(b >= a for a, b in zip(ds, ds[1:])) or any(d <= 0 or d > 1 for d in ds):
            errors.append("sharpness deltas must decrease within (0, 1] and have >= 2 entries")
    if P.get("weight") is not None and P["weight"] not in WEIGHT_OVERRIDES:
        errors.append(f"weight override must be one of {WEIGHT_OVERRIDES}")
    res = P.get("resolutions")
    if res is not None and (not isinstance(res, list) or any(not isinstance(r, int) or r < 2 for r in res)):
        errors.append("resolutions must be a list of integers >= 2")
    for key in ("bound", "drift_tol", "tau"):
        if key in P and P[key] is not None and not (isinstance(P[key], (int, float)) and P[key] > 0):
            errors.append(f"{key} must be a positive number")
    if "tau" in P and isinstance(P["tau"], (int, float)) and P["tau"] < 1:
        errors.append("tau must be >= 1")
    key = SAMPLING.get(cfg.experiment)
    family_random = isinstance(fam, dict) and fam.get("kind") == "bump" and "centers" not in fam
    if ((key and P.get(key) is None) or family_random) and cfg.seed is None:
        errors.append("seed is required because this experiment samples randomly")


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads exponent floats without a dot (``1e-9``), as YAML 1.2 does."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+][0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_text(text: str) -> dict:
    """JSON or YAML text to a mapping."""
    try:
        data = json.loads(text)
    except ValueError:
        data = None
    try:
        if data is None:
            data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as e:
        raise ConfigError([f"unparseable config: {e}"]) from e
    if not isinstance(data, dict):
        raise ConfigError(["config must be a mapping"])
    return data


def parse_config(text_or_dict, experiment: str | None = None, seed: int | None = None,
                 workers: int | None = None) -> LabConfig:
    """Validated :class:`LabConfig`; raises :class:`ConfigError` listing every violation.

    ``experiment``, ``seed`` and ``workers`` override the file (command-line values).
    """
    data = load_text(text_or_dict) if isinstance(text_or_dict, str) else copy.deepcopy(text_or_dict)
    errors: list[str] = []
    exp = experiment or data.get("experiment")
    if exp not in EXPERIMENTS:
        errors.append(f"unknown experiment {exp!r}")
        raise ConfigError(errors)
    if experiment and data.get("experiment") not in (None, experiment):
        errors.append(f"config is for {data.get('experiment')!r}, not {experiment!r}")
    known = {"experiment", "example", "params", "reach", "seed", "workers"}
    for k in sorted(set(data) - known):
        errors.append(f"unknown top-level key {k!r}")
    n_before = len(errors)
    ex = _normalize_example(data.get("example", {"name": "grushin"}), errors)
    example_ok = len(errors) == n_before
    params = copy.deepcopy(DEFAULTS[exp])
    given = data.get("params") or {}
    if not isinstance(given, dict):
        errors.append("params must be a mapping")
        given = {}
    for k in sorted(set(given) - set(params)):
        errors.append(f"unknown parameter {k!r} for {exp}")
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(params.get(k), dict):
            params[k] = {**params[k], **v}
        else:
            params[k] = v
    reach = data.get("reach") or {}
    try:
        ReachabilityParams(**reach)
    except (TypeError, ValueError) as e:
        errors.append(f"bad reach parameters: {e}")
        reach = {}
    s = seed if seed is not None else data.get("seed")
    if s is not None and (not isinstance(s, int) or isinstance(s, bool) or not 0 <= s < 2 ** 64):
        errors.append("seed must be a 64-bit nonnegative integer")
    w = workers if workers is not None else data.get("workers", 1)
    if not isinstance(w, int) or w < 1:
        errors.append("workers must be a positive integer")
        w = 1
    cfg = LabConfig(exp, ex, params, dict(reach), s, w)
    if example_ok:
        _validate(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def dump_config(cfg: LabConfig, fmt: str = "yaml") -> str:
    d = cfg.to_dict()
    if fmt == "json":
        return json.dumps(d, indent=2, sort_keys=True)
    return yaml.safe_dump(d, sort_keys=True)
