"""Data generation, file formats, experiment runner and CLI."""
from .experiment import ExperimentConfig, MetricsRow, run_experiment

__all__ = ["ExperimentConfig", "MetricsRow", "run_experiment"]
