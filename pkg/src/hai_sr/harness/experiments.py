"""Preset configurations for the benchmark experiments E1 through E8.

Each preset pins the environment, agent roster, budgets, and hyperparameters
for one study; `experiment_config` materializes it as an ExperimentConfig and
accepts keyword overrides.  E6 ships in three sizes: "E6-umaze", "E6"
(medium maze), and "E6-large".
"""

from __future__ import annotations

from .config import ConfigError, ExperimentConfig

_TEN_SEEDS = tuple(range(10))

_REGISTRY = {
    "E1": (
        "serpentine corridor: hierarchical vs flat vs Q-learning curves",
        dict(
            env="serpentine",
            agents=("hierarchical", "flat", "qlearning"),
            episodes=1200,
            step_cap=600,
            eval_cap=200,
            seeds=_TEN_SEEDS,
            k=4,
            alpha=0.1,
            sr_mode="td",
            explore_starts="fixed",
            eval_starts="fixed",
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
            q_alpha=0.02,
            q_eps_start=0.35,
            q_eps_end=0.35,
        ),
    ),
    "E2": (
        "serpentine start-distance sweep after a fixed training budget",
        dict(
            env="serpentine",
            agents=("hierarchical", "flat"),
            episodes=1200,
            step_cap=600,
            eval_cap=200,
            seeds=_TEN_SEEDS,
            k=4,
            alpha=0.1,
            sr_mode="td",
            explore_starts="fixed",
            eval_starts="fixed",
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
            distances=(5, 10, 15, 20, 25, 30, 35, 40),
        ),
    ),
    "E3": (
        "four-rooms goal switching: replanning speed per agent",
        dict(
            env="four_rooms",
            agents=("hierarchical", "flat", "qlearning"),
            episodes=400,
            step_cap=200,
            eval_cap=200,
            seeds=_TEN_SEEDS,
            k=4,
            sr_mode="analytic",
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
            goals="1,7;7,1;1,1",
            switch_cap=40,
        ),
    ),
    "E4": (
        "mountain car: planning-decision counts and success rates",
        dict(
            env="mountain_car",
            agents=("hierarchical", "flat"),
            episodes=400,
            step_cap=200,
            eval_cap=200,
            seeds=_TEN_SEEDS,
            k=6,
            sticky=5,
            sr_mode="analytic",
            alpha_max=0.25,
            sigma_rbf=0.15,
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
        ),
    ),
    "E5": (
        "point maze (umaze): single-goal learning curves",
        dict(
            env="pointmaze_umaze",
            agents=("hierarchical", "flat"),
            episodes=300,
            step_cap=200,
            eval_cap=600,
            test_cap=5000,
            seeds=tuple(range(20)),
            k=4,
            alpha=0.05,
            sr_mode="analytic",
            explore_starts="diverse",
            eval_starts="fixed",
            alpha_max=0.2,
            sigma_rbf=0.08,
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
        ),
    ),
    "E6-umaze": (
        "point maze (umaze): multi-goal replanning without retraining",
        dict(
            env="pointmaze_umaze",
            agents=("hierarchical", "flat"),
            episodes=300,
            step_cap=200,
            eval_cap=600,
            test_cap=5000,
            seeds=(0, 1),
            k=4,
            alpha=0.05,
            sr_mode="analytic",
            explore_starts="diverse",
            eval_starts="fixed",
            alpha_max=0.2,
            sigma_rbf=0.08,
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
            goals="3,1;1,3;3,3;1,2;2,3",
        ),
    ),
    "E6": (
        "point maze (medium): multi-goal replanning without retraining",
        dict(
            env="pointmaze_medium",
            agents=("hierarchical", "flat"),
            episodes=600,
            step_cap=200,
            eval_cap=2000,
            test_cap=10000,
            seeds=(0, 1),
            k=8,
            alpha=0.05,
            sr_mode="analytic",
            explore_starts="diverse",
            eval_starts="fixed",
            alpha_max=0.2,
            sigma_rbf=0.05,
            eval_every=50,
            eval_episodes=5,
            refresh_every=150,
            goals="6,5;1,6;6,1;2,5;4,1",
        ),
    ),
    "E6-large": (
        "point maze (large): multi-goal replanning without retraining",
        dict(
            env="pointmaze_large",
            agents=("hierarchical", "flat"),
            episodes=1000,
            step_cap=200,
            eval_cap=3000,
            test_cap=20000,
            seeds=(0, 1),
            k=12,
            alpha=0.05,
            sr_mode="analytic",
            explore_starts="diverse",
            eval_starts="fixed",
            alpha_max=0.2,
            sigma_rbf=0.04,
            eval_every=100,
            eval_episodes=3,
            refresh_every=250,
            goals="7,10;1,10;7,1;3,6;5,10;1,2",
        ),
    ),
    "E7": (
        "five rooms: noisy-room entropy sweep and path preference",
        dict(
            env="five_rooms",
            agents=("hierarchical",),
            episodes=600,
            step_cap=200,
            eval_cap=200,
            seeds=(0, 1, 2, 3, 4),
            k=5,
            alpha=0.1,
            sr_mode="td",
            noise_eta=0.1,
            region_eta=0.1,
            eta_levels=(0.1, 0.24, 0.38, 0.52, 0.66, 0.8),
            sweep_episodes=50,
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
        ),
    ),
    "E8": (
        "key-and-door grid: macro plan structure and key pickup",
        dict(
            env="key_grid",
            agents=("hierarchical",),
            episodes=800,
            step_cap=200,
            eval_cap=200,
            seeds=_TEN_SEEDS,
            k=5,
            alpha=0.1,
            sr_mode="analytic",
            eval_every=25,
            eval_episodes=20,
            refresh_every=100,
        ),
    ),
}


def experiment_ids() -> list:
    return sorted(_REGISTRY)


def describe(exp_id: str) -> str:
    if exp_id not in _REGISTRY:
        raise ConfigError(f"unknown experiment {exp_id!r}")
    return _REGISTRY[exp_id][0]


def experiment_config(exp_id: str, **overrides) -> ExperimentConfig:
    """Materialize a preset, optionally overriding individual fields."""
    if exp_id not in _REGISTRY:
        raise ConfigError(
            f"unknown experiment {exp_id!r}; choose from {', '.join(experiment_ids())}"
        )
    kwargs = dict(_REGISTRY[exp_id][1])
    kwargs["experiment"] = exp_id
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)
