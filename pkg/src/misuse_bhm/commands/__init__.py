"""
ABOUTME: Command module initialization with one plain function per CLI command
ABOUTME: Provides organized imports for all CLI command implementations
"""

from .fit import check_fresh, fit_model, load_run
from .paths import RunPaths, run_meta
from .predict import predict_run
from .prepare import prepare_data, run_dataset
from .report import collect_report
from .simulate import simulate_data
from .validate import SUBCOMMANDS, validate_run

__all__ = [
    "RunPaths",
    "SUBCOMMANDS",
    "check_fresh",
    "collect_report",
    "fit_model",
    "load_run",
    "predict_run",
    "prepare_data",
    "run_dataset",
    "run_meta",
    "simulate_data",
    "validate_run",
]
