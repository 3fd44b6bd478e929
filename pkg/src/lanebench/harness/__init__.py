"""Experiment orchestration, configuration, persistence and plotting."""

from .config import load_config, load_scenario, scenario_from_config
from .experiments import (ExperimentSpec, run_conventional, run_end_to_end,
                          run_transfer)
from .plots import emit_plots
from .report import load_report, recompute_aggregates, save_report

__all__ = [
    "load_config",
    "load_scenario",
    "scenario_from_config",
    "ExperimentSpec",
    "run_conventional",
    "run_end_to_end",
    "run_transfer",
    "emit_plots",
    "load_report",
    "recompute_aggregates",
    "save_report",
]
