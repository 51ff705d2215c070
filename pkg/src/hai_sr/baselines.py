"""Tabular Q-learning and uniform-random baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class QTable:
    q: np.ndarray
    alpha_q: float = 0.1
    gamma_q: float = 0.95
    epsilon: float = 0.1

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        if self.q.ndim != 2:
            raise ValueError("q must be a states x actions matrix")
        if not np.all(np.isfinite(self.q)):
            raise ValueError("q entries must be finite")

    @staticmethod
    def zeros(n_states: int, n_actions: int, **kwargs) -> "QTable":
        return QTable(q=np.zeros((n_states, n_actions)), **kwargs)


def q_update(qt: QTable, s: int, a: int, r: float, s_next: int,
             done: bool = False) -> QTable:
    """One-step Q-learning update in place; zero bootstrap at terminals."""
    target = r if done else r + qt.gamma_q * float(np.max(qt.q[s_next]))
    qt.q[s, a] += qt.alpha_q * (target - qt.q[s, a])
    return qt


def epsilon_greedy(qt: QTable, s: int, rng: np.random.Generator) -> int:
    """Explore uniformly with probability epsilon, else greedy (lowest-index ties)."""
    if qt.epsilon > 0.0 and rng.random() < qt.epsilon:
        return int(rng.integers(qt.q.shape[1]))
    return int(np.argmax(qt.q[s]))


def epsilon_schedule(episode: int, episodes: int, start: float = 0.1,
                     end: float = 0.01) -> float:
    """Linear decay from start to end across the training budget."""
    if episodes <= 1:
        return end
    frac = min(max(episode / (episodes - 1), 0.0), 1.0)
    return start + (end - start) * frac


def random_rollout(env, step_cap: int, rng: np.random.Generator):
    """Uniform-random episode; imported lazily to avoid a module cycle."""
    from .planner import run_episode

    return run_episode(env, "random", rng=rng, step_cap=step_cap)


def random_success_stats(env, step_cap: int, n_episodes: int,
                         rng: np.random.Generator) -> tuple:
    """(mean reward, success rate) of the uniform-random policy.

    Plain per-episode rollouts; fast enough because failed episodes cost
    one vectorized draw of actions per step batch.
    """
    total_reward = 0.0
    successes = 0
    for _ in range(n_episodes):
        res = random_rollout(env, step_cap, rng)
        total_reward += res.total_reward
        successes += int(res.success)
    return total_reward / n_episodes, successes / n_episodes
