"""Discretized mountain car.

Canonical underpowered-cart dynamics on x in [-1.2, 0.6], v in [-0.07, 0.07]:

    v' = clip(v + 0.001 (a - 1) - 0.0025 cos(3x))
    x' = clip(x + v')

with the velocity zeroed on contact with the left wall.  Reaching
x >= 0.5 terminates.  Rewards are -1 per step and 0 on the terminal
transition.  States discretize (x, v) on a bins_x by bins_v grid with the
upper edges closed; the flat index is bin_x * bins_v + bin_v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MountainCarSpec:
    x_min: float = -1.2
    x_max: float = 0.6
    v_min: float = -0.07
    v_max: float = 0.07
    goal_x: float = 0.5
    force: float = 0.001
    gravity: float = 0.0025
    bins_x: int = 10
    bins_v: int = 10
    step_cap: int = 200
    start_low: float = -0.6
    start_high: float = -0.4

    def __post_init__(self):
        if self.bins_x < 1 or self.bins_v < 1:
            raise ValueError("bin counts must be positive")
        if not (self.x_min < self.goal_x <= self.x_max):
            raise ValueError("goal must sit inside the position range")


def mc_step(spec: MountainCarSpec, x: float, v: float, action: int):
    """One physics step; returns (x', v', done)."""
    if action not in (0, 1, 2):
        raise ValueError("action must be 0, 1, or 2")
    v2 = v + (action - 1) * spec.force - spec.gravity * np.cos(3.0 * x)
    v2 = float(np.clip(v2, spec.v_min, spec.v_max))
    x2 = float(np.clip(x + v2, spec.x_min, spec.x_max))
    if x2 <= spec.x_min:
        v2 = 0.0
    done = x2 >= spec.goal_x
    return x2, v2, done


def mc_discretize(spec: MountainCarSpec, x: float, v: float) -> int:
    """Flat bin index with closed upper edges."""
    wx = (spec.x_max - spec.x_min) / spec.bins_x
    wv = (spec.v_max - spec.v_min) / spec.bins_v
    bx = min(int((x - spec.x_min) / wx), spec.bins_x - 1)
    bv = min(int((v - spec.v_min) / wv), spec.bins_v - 1)
    return bx * spec.bins_v + bv


class MountainCar:
    """Steppable wrapper holding the continuous state."""

    def __init__(self, spec: MountainCarSpec = MountainCarSpec()):
        self.spec = spec
        self.n_states = spec.bins_x * spec.bins_v
        self.n_obs = self.n_states
        self.n_actions = 3
        self._x = self._v = 0.0

    @property
    def continuous_state(self):
        return self._x, self._v

    def goal_states(self) -> np.ndarray:
        """Bins whose position range contains or exceeds the goal line."""
        spec = self.spec
        wx = (spec.x_max - spec.x_min) / spec.bins_x
        first = int((spec.goal_x - spec.x_min) / wx)
        first = min(first, spec.bins_x - 1)
        cols = np.arange(first, spec.bins_x)
        return (cols[:, None] * spec.bins_v + np.arange(spec.bins_v)[None, :]).ravel()

    def coords(self) -> np.ndarray:
        """Normalized (x, v) bin centers, one row per state."""
        spec = self.spec
        cx = (np.arange(spec.bins_x) + 0.5) / spec.bins_x
        cv = (np.arange(spec.bins_v) + 0.5) / spec.bins_v
        out = np.empty((self.n_states, 2))
        for i in range(spec.bins_x):
            for j in range(spec.bins_v):
                out[i * spec.bins_v + j] = (cx[i], cv[j])
        return out

    def reset(self, rng: np.random.Generator, start_state=None):
        spec = self.spec
        self._x = float(rng.uniform(spec.start_low, spec.start_high))
        self._v = 0.0
        s = mc_discretize(spec, self._x, self._v)
        return s, s

    def step(self, action: int, rng: np.random.Generator = None):
        self._x, self._v, done = mc_step(self.spec, self._x, self._v, action)
        s = mc_discretize(self.spec, self._x, self._v)
        reward = 0.0 if done else -1.0
        return s, s, reward, done

    @property
    def noisy(self) -> bool:
        return False
