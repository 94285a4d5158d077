"""Experiment harness: configs, runs, reports and the ``lab`` command."""

from .config import ConfigError, LabConfig, dump_config, parse_config
from .report import ExperimentReport, emit_report
from .runner import run_experiment

__all__ = ["ConfigError", "ExperimentReport", "LabConfig", "dump_config", "emit_report",
           "parse_config", "run_experiment"]
