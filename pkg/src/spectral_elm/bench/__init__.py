"""Experiment orchestration: specs, sweeps, artifacts and the CLI."""

from .experiments import (
    ExperimentError,
    ExperimentSpec,
    RunManifest,
    SweepPoint,
    SweepResult,
    paper_suite,
    run_experiment,
    run_l_sweep,
    run_ntk_report,
    run_sd_sweep,
    run_table1,
    suggested_sd,
)
from .plot import emit_plot

__all__ = [
    "ExperimentError", "ExperimentSpec", "RunManifest", "SweepPoint", "SweepResult", "emit_plot",
    "paper_suite", "run_experiment", "run_l_sweep", "run_ntk_report", "run_sd_sweep", "run_table1",
    "suggested_sd",
]
