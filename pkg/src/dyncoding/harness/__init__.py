"""Experiment files, trial batteries, summaries and the command line."""

from __future__ import annotations

from .config import ExperimentSpec, load_spec, parse_spec
from .experiment import (
    CSV_COLUMNS,
    InsufficientData,
    SummaryRow,
    fit_scaling,
    recompute_rows,
    rows_to_csv,
    run_experiment,
    write_outputs,
)

__all__ = [
    "CSV_COLUMNS",
    "ExperimentSpec",
    "InsufficientData",
    "SummaryRow",
    "fit_scaling",
    "load_spec",
    "parse_spec",
    "recompute_rows",
    "rows_to_csv",
    "run_experiment",
    "write_outputs",
]
