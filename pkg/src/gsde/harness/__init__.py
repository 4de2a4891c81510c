"""Experiments, configuration, reports and the command line."""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .experiments import (
    ConvergenceReport,
    ConvergenceRow,
    IncrementReport,
    MomentReport,
    PathExplosion,
    convergence_experiment,
    increment_experiment,
    moment_experiment,
    paths_table,
    slope_fit,
)
from .report import emit
from .cli import run_cli
