"""Experiment runner: configuration, orchestration and result emission."""

from .config import ExperimentConfig, load_config, validate
from .io import ResultBundle, write_bundle
from .runner import run
from .tails import hill_tail_index, lp_report

__all__ = ["ExperimentConfig", "ResultBundle", "hill_tail_index", "load_config", "lp_report", "run", "validate",
           "write_bundle"]
