"""Experiment harness: configs, presets, runners, metrics, and run outputs."""

from __future__ import annotations

from .artifact import ArtifactError, load_artifact, save_artifact
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_hash,
    format_config,
    load_config,
    parse_config,
)
from .experiments import describe, experiment_config, experiment_ids
from .metrics import MetricRow, MetricSeries, r_stability
from .outputs import emit_outputs, plot_clusters, plot_learning_curves
from .runner import (
    ExperimentFailure,
    RunResult,
    TrainedBundle,
    entropy_sweep,
    eval_stats,
    goal_revaluation,
    make_env,
    run_experiment,
    train_agent_seed,
)

__all__ = [
    "ArtifactError",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentFailure",
    "MetricRow",
    "MetricSeries",
    "RunResult",
    "TrainedBundle",
    "apply_overrides",
    "config_hash",
    "describe",
    "emit_outputs",
    "entropy_sweep",
    "eval_stats",
    "experiment_config",
    "experiment_ids",
    "format_config",
    "goal_revaluation",
    "load_artifact",
    "load_config",
    "make_env",
    "parse_config",
    "plot_clusters",
    "plot_learning_curves",
    "r_stability",
    "run_experiment",
    "save_artifact",
    "train_agent_seed",
]
