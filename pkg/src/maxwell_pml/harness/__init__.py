"""Experiment harness: INI configuration, drivers and the command-line interface."""
from .cli import main
from .config import ConfigError, ExperimentConfig, load_config, read_config

__all__ = ["main", "ConfigError", "ExperimentConfig", "load_config", "read_config"]
