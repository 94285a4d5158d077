"""``lab <experiment> --config FILE [--seed S] [--workers W] [--out DIR] [--format F]``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import EXPERIMENTS, ConfigError, parse_config
from .report import SUFFIX, emit_report
from .runner import run_experiment

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INVARIANT = 0, 1, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description=__doc__)
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="YAML or JSON experiment config")
    ap.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    ap.add_argument("--workers", type=int, default=None, help="parallel case workers")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--format", default="json", choices=sorted(SUFFIX))
    return ap


def exit_code(report) -> int:
    if not all(report.invariants.values()):
        return EXIT_INVARIANT
    return EXIT_OK if report.passed else EXIT_NUMERIC


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"lab: cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config(text, experiment=args.experiment, seed=args.seed, workers=args.workers)
    except ConfigError as e:
        for v in e.violations:
            print(f"lab: config: {v}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report = run_experiment(cfg)
    except (ValueError, ArithmeticError, MemoryError) as e:
        print(f"lab: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        path = emit_report(report, args.format, args.out)
    except OSError as e:
        print(f"lab: cannot write report: {e}", file=sys.stderr)
        return EXIT_IO
    code = exit_code(report)
    status = {EXIT_OK: "pass", EXIT_NUMERIC: "FAIL", EXIT_INVARIANT: "INVARIANT VIOLATION"}[code]
    print(f"{cfg.experiment}: {status} ({report.wall_time:.1f} s) -> {path}")
    return code


if __name__ == "__main__":
    sys.exit(main())
