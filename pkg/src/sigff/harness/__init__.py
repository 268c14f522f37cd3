"""Configuration, persistence, experiment orchestration and the command line."""

from .config import DEFAULTS, KINDS, ExperimentConfig, load_config, parse_profile
from .experiments import KIND_TABLE, RunResult, run_experiment
from .io import REPORT_COLUMNS, dump_field, load_field, write_csv, write_manifest

__all__ = [
    "DEFAULTS",
    "KINDS",
    "ExperimentConfig",
    "load_config",
    "parse_profile",
    "KIND_TABLE",
    "RunResult",
    "run_experiment",
    "REPORT_COLUMNS",
    "dump_field",
    "load_field",
    "write_csv",
    "write_manifest",
]
