"""Experiment reports and their JSON, CSV and plot-data forms."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

SCHEMA = "cclab.report/1"

# CSV columns used when a report has no records
COLUMNS = {
    "nsw": ["x", "delta", "volume", "predicted", "ratio"],
    "volume": ["case", "delta", "volume"],
    "distance": ["case", "x", "y", "rho"],
    "sharpness": ["kind", "delta", "num", "den", "ratio"],
}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int | None
    workers: int
    records: list
    summary: dict
    invariants: dict
    passed: bool
    curves: dict = field(default_factory=dict)
    tool_version: str = ""
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {"schema": SCHEMA, "tool_version": self.tool_version,
                "experiment": self.experiment, "config": self.config, "seed": self.seed,
                "workers": self.workers, "records": self.records, "summary": self.summary,
                "invariants": self.invariants, "pass": self.passed, "curves": self.curves,
                "wall_time": self.wall_time}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(d["experiment"], d["config"], d["seed"], d["workers"], d["records"],
                   d["summary"], d["invariants"], d["pass"], d.get("curves", {}),
                   d["tool_version"], d["wall_time"])

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        return cls.from_dict(json.loads(text))

    def recompute(self) -> tuple[dict, dict, bool]:
        """Summary, invariants and verdict rebuilt from the stored records."""
        from .runner import summarize
        s, inv, ok = summarize(self.experiment, self.records, self.config["params"])
        return s, inv, bool(ok and all(inv.values()))


def _flatten(rec: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in rec.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        elif isinstance(v, list):
            out[key] = json.dumps(v)
        else:
            out[key] = v
    return out


def to_csv(report: ExperimentReport) -> str:
    rows = [_flatten(r) for r in report.records]
    cols: list = []
    for r in rows:
        cols.extend(k for k in r if k not in cols)
    if not cols:
        cols = COLUMNS.get(report.experiment, ["case"])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def to_plotdata(report: ExperimentReport) -> str:
    """Blocks of ``x y`` lines, one per named curve, each led by ``# curve: name``."""
    lines = [f"# experiment: {report.experiment}", "# columns: x y"]
    for name in sorted(report.curves):
        lines.append(f"# curve: {name}")
        lines.extend(f"{x!r} {y!r}" for x, y in report.curves[name])
        lines.append("")
    return "\n".join(lines) + "\n"


SUFFIX = {"json": ".json", "csv": ".csv", "plotdata": ".plot.dat"}


def emit_report(report: ExperimentReport, fmt: str = "json", out_dir=".") -> Path:
    """Write one file in ``fmt`` under ``out_dir``; returns its path."""
    if fmt not in SUFFIX:
        raise ValueError(f"unknown format {fmt!r}")
    text = {"json": report.to_json, "csv": lambda: to_csv(report),
            "plotdata": lambda: to_plotdata(report)}[fmt]()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{report.experiment}{SUFFIX[fmt]}"
    path.write_text(text)
    return path
