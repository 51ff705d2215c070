"""Successor representations over discrete state spaces.

The successor matrix M holds expected discounted future occupancies under a
fixed policy: M = (I - gamma * T)^-1 for a row-stochastic transition matrix
T, or equivalently the limit of the temporal-difference rule

    M(s, :) += alpha * (onehot(s') + gamma * M(s', :) - M(s, :))

applied along sampled transitions.  Rows index the current state, columns the
future state.  State values follow as v = M r, and goal-directed scores for
active inference as nu = M (max(g) - g) where g is the one-step expected
free energy per state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_model import EfeVector, _freeze

_ROW_STOCHASTIC_ATOL = 1e-8


@dataclass(frozen=True)
class SuccessorMatrix:
    """Expected discounted occupancy matrix with its learning parameters."""

    M: np.ndarray
    gamma: float
    alpha: float
    update_count: int = 0

    def __post_init__(self):
        object.__setattr__(self, "M", _freeze(self.M))
        if self.M.ndim != 2 or self.M.shape[0] != self.M.shape[1]:
            raise ValueError("M must be square")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError("gamma must lie in (0, 1)")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError("alpha must lie in (0, 1]")
        if self.update_count < 0:
            raise ValueError("update_count must be non-negative")

    @property
    def n_states(self) -> int:
        return self.M.shape[0]

    @staticmethod
    def identity(n_states: int, gamma: float, alpha: float) -> "SuccessorMatrix":
        """TD starting point: each state predicts only itself."""
        return SuccessorMatrix(M=np.eye(n_states), gamma=gamma, alpha=alpha)


def td_update(sr: SuccessorMatrix, s: int, s_next: int) -> SuccessorMatrix:
    """Single temporal-difference update for an observed transition s -> s_next.

    The occupancy indicator marks the successor state, so the expected fixed
    point is (I - gamma T)^-1 T: the discounted occupancy of upcoming states,
    not counting the one currently occupied.
    """
    n = sr.n_states
    if not (0 <= s < n and 0 <= s_next < n):
        raise ValueError("state index out of range")
    M = sr.M.copy()
    target = sr.gamma * M[s_next, :]
    target = target.copy()
    target[s_next] += 1.0
    M[s, :] += sr.alpha * (target - M[s, :])
    return SuccessorMatrix(M=M, gamma=sr.gamma, alpha=sr.alpha, update_count=sr.update_count + 1)


def td_update_path(sr: SuccessorMatrix, states, next_states) -> SuccessorMatrix:
    """Apply the TD rule along a whole trajectory in order.

    Equivalent to folding td_update over the pairs but with a single copy of
    M, which matters for long training runs.
    """
    states = np.asarray(states, dtype=np.int64)
    next_states = np.asarray(next_states, dtype=np.int64)
    if states.shape != next_states.shape:
        raise ValueError("states and next_states must align")
    M = sr.M.copy()
    a, g = sr.alpha, sr.gamma
    for s, s2 in zip(states, next_states):
        target = g * M[s2, :]
        M[s, :] += a * (target - M[s, :])
        M[s, s2] += a
    return SuccessorMatrix(
        M=M, gamma=g, alpha=a, update_count=sr.update_count + len(states)
    )


def analytic_sr(T: np.ndarray, gamma: float, alpha: float = 1.0) -> SuccessorMatrix:
    """Closed-form successor matrix M = (I - gamma T)^-1 for row-stochastic T."""
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be square")
    if np.any(T < -_ROW_STOCHASTIC_ATOL) or not np.allclose(
        T.sum(axis=1), 1.0, atol=_ROW_STOCHASTIC_ATOL
    ):
        raise ValueError("T must be row-stochastic")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must lie in (0, 1)")
    n = T.shape[0]
    M = np.linalg.solve(np.eye(n) - gamma * T, np.eye(n))
    return SuccessorMatrix(M=M, gamma=gamma, alpha=alpha)


def default_transition(B: np.ndarray) -> np.ndarray:
    """Row-stochastic state dynamics under a uniformly random policy.

    Averages the column-stochastic per-action matrices and transposes into
    row convention.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 3:
        raise ValueError("B must be (n_a, n_s, n_s)")
    return B.mean(axis=0).T


def value_from_sr(sr: SuccessorMatrix, rewards) -> np.ndarray:
    """State values v = M r for a per-state reward vector."""
    r = np.asarray(rewards, dtype=float)
    if r.shape != (sr.n_states,):
        raise ValueError("reward vector length must match the state count")
    return sr.M @ r


def goal_scores(g) -> np.ndarray:
    """Non-negative per-state goal-seeking scores: max(g) - g.

    Flips the sign of the expected free energy so preferred states score
    highest and the argmax of downstream value vectors points at them.
    """
    g = np.asarray(g, dtype=float)
    return g.max() - g


@dataclass(frozen=True)
class EfeValueFunction:
    """Discounted goal-proximity scores nu = M (max(g) - g)."""

    nu: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nu", _freeze(self.nu))
        if self.nu.ndim != 1:
            raise ValueError("nu must be a vector")


def efe_value(sr: SuccessorMatrix, efe: EfeVector) -> EfeValueFunction:
    """Project per-state goal-seeking scores through the successor matrix."""
    if efe.g.shape != (sr.n_states,):
        raise ValueError("EFE vector length must match the state count")
    return EfeValueFunction(nu=sr.M @ goal_scores(efe.g))


def sr_distance(a: SuccessorMatrix, b: SuccessorMatrix) -> float:
    """Frobenius distance between two successor matrices, scaled by 1/n."""
    if a.M.shape != b.M.shape:
        raise ValueError("successor matrices must share a shape")
    return float(np.linalg.norm(a.M - b.M) / a.n_states)
