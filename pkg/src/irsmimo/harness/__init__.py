"""Scenario presets, seeded Monte Carlo sweeps and result files."""

from .config import ESTIMATORS, PRESETS, ScenarioConfig, load_config, parse_range, preset
from .io import emit_results, read_csv, write_plot_data
from .runner import SweepRow, SweepTable, TrialRecord, run_sweep, run_trial, trial_seed

__all__ = [
    "ESTIMATORS",
    "PRESETS",
    "ScenarioConfig",
    "load_config",
    "parse_range",
    "preset",
    "emit_results",
    "read_csv",
    "write_plot_data",
    "SweepRow",
    "SweepTable",
    "TrialRecord",
    "run_sweep",
    "run_trial",
    "trial_seed",
]
