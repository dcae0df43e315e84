"""Experiment orchestration: configs, seeded parallel trials, pipelines, CLI."""

from .config import ConfigError, ExperimentConfig, load_config, resolve_config
from .mc import run_trials, trial_mapper
from .pipelines import (
    PreflightError,
    ReferenceEnergy,
    ReferenceEnergyError,
    RunSummary,
    pick_reference_energy,
    run,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "PreflightError",
    "ReferenceEnergy",
    "ReferenceEnergyError",
    "RunSummary",
    "load_config",
    "pick_reference_energy",
    "resolve_config",
    "run",
    "run_trials",
    "trial_mapper",
]
