"""Experiment orchestration: configs, Monte Carlo, suites and reports."""

from mplab.runner.config import ExperimentConfig, from_mapping, load_config
from mplab.runner.monte_carlo import TrialRecord, run_monte_carlo
from mplab.runner.report import Criterion, Report, emit_report
from mplab.runner.suites import (
    VERIFY,
    run_suite,
    verify_identity,
    verify_moments,
    verify_normality,
    verify_smallball,
    verify_sums,
    verify_triangle,
)

__all__ = [
    "Criterion",
    "ExperimentConfig",
    "Report",
    "TrialRecord",
    "VERIFY",
    "emit_report",
    "from_mapping",
    "load_config",
    "run_monte_carlo",
    "run_suite",
    "verify_identity",
    "verify_moments",
    "verify_normality",
    "verify_smallball",
    "verify_sums",
    "verify_triangle",
]
