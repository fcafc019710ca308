"""Experiment harness: configuration, persistence, CSV artifacts, CLI."""

from .archive import load_model, save_model
from .config import ExperimentConfig, load_config
from .csvio import emit_csv, read_csv, read_matrix
from .experiments import eval_experiment, export_kernels, run_experiment
from .selftest import run_selftest

__all__ = [
    "ExperimentConfig", "emit_csv", "eval_experiment", "export_kernels",
    "load_config", "load_model", "read_csv", "read_matrix",
    "run_experiment", "run_selftest", "save_model",
]
