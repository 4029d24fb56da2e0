"""Experiment orchestration: configs, sweeps, persistence, plots, CLI."""

from .config import ExperimentConfig, config_hash, default_config, from_mapping, load_config
from .experiments import RunResult, run_experiment
from .plots import emit_plots
from .sweep import CellOutcome, cell_stream_index, run_cells, write_csv, write_run_log

__all__ = [
    "CellOutcome",
    "ExperimentConfig",
    "RunResult",
    "cell_stream_index",
    "config_hash",
    "default_config",
    "emit_plots",
    "from_mapping",
    "load_config",
    "run_cells",
    "run_experiment",
    "write_csv",
    "write_run_log",
]
