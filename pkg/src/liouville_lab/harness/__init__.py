"""Experiment harness: configuration, seeding, suites, reports and persistence."""

from .config import ConfigError, ExperimentConfig
from .report import CheckRecord, RunReport
from .suites import run, run_suite

__all__ = ["ConfigError", "ExperimentConfig", "CheckRecord", "RunReport", "run", "run_suite"]
