"""Discrete generative model, exact belief updating, and one-step expected
free energy.

The model is the usual discrete POMDP tuple: a likelihood matrix ``A`` mapping
hidden states to observations, one transition matrix per action stacked in
``B``, a prior preference ``C`` over observations, and an initial-state prior
``D``.  All distributions are column-stochastic: ``A[:, s]`` is the
observation distribution in state ``s`` and ``B[a][:, s]`` is the
next-state distribution after taking action ``a`` in state ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_FLOOR = 1e-16

_STOCHASTIC_ATOL = 1e-8


def clamped_log(x) -> np.ndarray:
    """Elementwise ln(max(x, LOG_FLOOR)); keeps log arithmetic finite."""
    return np.log(np.maximum(np.asarray(x, dtype=float), LOG_FLOOR))


def softmax(x) -> np.ndarray:
    """Numerically stable softmax of a vector."""
    z = np.asarray(x, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def entropy(p) -> float:
    """Shannon entropy in nats."""
    q = np.asarray(p, dtype=float)
    return float(-(q * clamped_log(q)).sum())


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


def _check_columns_stochastic(mat: np.ndarray, name: str) -> None:
    if np.any(mat < -_STOCHASTIC_ATOL):
        raise ValueError(f"{name} has negative entries")
    colsums = mat.sum(axis=0)
    if not np.allclose(colsums, 1.0, atol=_STOCHASTIC_ATOL):
        raise ValueError(f"{name} columns must sum to 1 (got {colsums})")


@dataclass(frozen=True)
class GenerativeModel:
    """Immutable container for the model arrays.

    A : (n_o, n_s) likelihood, column-stochastic
    B : (n_a, n_s, n_s) transitions, each B[a] column-stochastic
    C : (n_o,) preference distribution over observations
    D : (n_s,) prior over the initial hidden state
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze(self.A))
        object.__setattr__(self, "B", _freeze(self.B))
        object.__setattr__(self, "C", _freeze(self.C))
        object.__setattr__(self, "D", _freeze(self.D))
        if self.A.ndim != 2:
            raise ValueError("A must be 2-D (n_o, n_s)")
        if self.B.ndim != 3 or self.B.shape[1] != self.B.shape[2]:
            raise ValueError("B must be (n_a, n_s, n_s)")
        n_o, n_s = self.A.shape
        if self.B.shape[1] != n_s:
            raise ValueError("A and B disagree on the number of states")
        if self.C.shape != (n_o,):
            raise ValueError("C must have one entry per observation")
        if self.D.shape != (n_s,):
            raise ValueError("D must have one entry per state")
        _check_columns_stochastic(self.A, "A")
        for a in range(self.B.shape[0]):
            _check_columns_stochastic(self.B[a], f"B[{a}]")
        _check_columns_stochastic(self.C[:, None], "C")
        _check_columns_stochastic(self.D[:, None], "D")

    @property
    def n_states(self) -> int:
        return self.A.shape[1]

    @property
    def n_obs(self) -> int:
        return self.A.shape[0]

    @property
    def n_actions(self) -> int:
        return self.B.shape[0]

    def replace_preference(self, C: np.ndarray) -> "GenerativeModel":
        """New model sharing A, B, D with a different preference vector."""
        return GenerativeModel(A=self.A, B=self.B, C=C, D=self.D)


def make_preference(n_obs: int, goal_obs, mass: float = 0.99) -> np.ndarray:
    """Preference vector with `mass` split over the goal observation(s) and
    the remaining 1 - mass spread uniformly over all observations."""
    goals = np.atleast_1d(np.asarray(goal_obs, dtype=int))
    if goals.size == 0:
        raise ValueError("at least one goal observation required")
    C = np.full(n_obs, (1.0 - mass) / n_obs)
    C[goals] += mass / goals.size
    return C


@dataclass(frozen=True)
class Belief:
    """Posterior over hidden states at a single step."""

    b: np.ndarray
    step: int = 0

    def __post_init__(self):
        object.__setattr__(self, "b", _freeze(self.b))
        if self.b.ndim != 1:
            raise ValueError("belief must be a vector")
        _check_columns_stochastic(self.b[:, None], "belief")

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.b))


def belief_update(model: GenerativeModel, prev: Belief, action: int, obs: int) -> Belief:
    """One Bayesian filtering step.

    b' = softmax( ln(A^T o) + ln(B_a b) ), which equals the exact posterior
    p(s' | o, a, b) up to the log floor on zero entries.
    """
    if not (0 <= action < model.n_actions):
        raise ValueError(f"action {action} out of range")
    if not (0 <= obs < model.n_obs):
        raise ValueError(f"observation {obs} out of range")
    predicted = model.B[action] @ prev.b
    log_post = clamped_log(model.A[obs, :]) + clamped_log(predicted)
    return Belief(b=softmax(log_post), step=prev.step + 1)


def initial_belief(model: GenerativeModel, obs: int) -> Belief:
    """Posterior over the initial state after seeing the first observation."""
    log_post = clamped_log(model.A[obs, :]) + clamped_log(model.D)
    return Belief(b=softmax(log_post), step=0)


@dataclass(frozen=True)
class EfeVector:
    """One-step expected free energy per state, split into its two terms.

    For the one-hot state s the risk is (As)^T (ln As - ln C) and the
    ambiguity is -diag(A^T ln A)^T s; g = risk + ambiguity.
    """

    g: np.ndarray
    risk: np.ndarray
    ambiguity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", _freeze(self.g))
        object.__setattr__(self, "risk", _freeze(self.risk))
        object.__setattr__(self, "ambiguity", _freeze(self.ambiguity))
        if not (self.g.shape == self.risk.shape == self.ambiguity.shape):
            raise ValueError("component shapes disagree")
        if not np.allclose(self.g, self.risk + self.ambiguity, atol=1e-12):
            raise ValueError("g must equal risk + ambiguity")


def efe_vector(model: GenerativeModel) -> EfeVector:
    """Expected free energy of occupying each state for one step."""
    log_A = clamped_log(model.A)
    log_C = clamped_log(model.C)
    risk = (model.A * (log_A - log_C[:, None])).sum(axis=0)
    ambiguity = -(model.A * log_A).sum(axis=0)
    return EfeVector(g=risk + ambiguity, risk=risk, ambiguity=ambiguity)


def policy_posterior(efe_totals) -> np.ndarray:
    """Posterior over policies: softmax of the negated expected free energy."""
    g = np.asarray(efe_totals, dtype=float)
    if g.size == 0:
        raise ValueError("no policies to score")
    return softmax(-g)


@dataclass(frozen=True)
class Trajectory:
    """Ordered batch of transitions collected from an environment."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        for name in ("states", "actions", "next_states", "observations"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        rew = np.asarray(self.rewards, dtype=float)
        rew.flags.writeable = False
        object.__setattr__(self, "rewards", rew)
        n = len(self.states)
        for name in ("actions", "next_states", "observations", "rewards"):
            if len(getattr(self, name)) != n:
                raise ValueError("trajectory arrays must share a length")

    def __len__(self) -> int:
        return len(self.states)

    @staticmethod
    def concat(parts: list["Trajectory"]) -> "Trajectory":
        if not parts:
            return Trajectory([], [], [], [], [])
        return Trajectory(
            states=np.concatenate([p.states for p in parts]),
            actions=np.concatenate([p.actions for p in parts]),
            next_states=np.concatenate([p.next_states for p in parts]),
            observations=np.concatenate([p.observations for p in parts]),
            rewards=np.concatenate([p.rewards for p in parts]),
        )


@dataclass(frozen=True)
class TransitionCounts:
    """Per-action transition counts; counts[a][s_next, s] is the number of
    observed (s, a) -> s_next triples."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError("counts must be (n_a, n_s, n_s)")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @staticmethod
    def zeros(n_actions: int, n_states: int) -> "TransitionCounts":
        return TransitionCounts(np.zeros((n_actions, n_states, n_states), dtype=np.int64))

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def learn_transitions(counts: TransitionCounts, traj: Trajectory) -> TransitionCounts:
    """Accumulate the trajectory's transition triples into a new count tensor."""
    n_a, n_s, _ = counts.counts.shape
    if len(traj) and (traj.actions.max() >= n_a or traj.actions.min() < 0):
        raise ValueError("trajectory action out of range")
    if len(traj) and (max(traj.states.max(), traj.next_states.max()) >= n_s):
        raise ValueError("trajectory state out of range")
    updated = counts.counts.copy()
    np.add.at(updated, (traj.actions, traj.next_states, traj.states), 1)
    return TransitionCounts(updated)


def normalize_counts(counts: TransitionCounts) -> np.ndarray:
    """Column-normalize counts into a transition tensor.

    Columns with no observations become self-loops so every column remains a
    distribution.
    """
    c = counts.counts.astype(float)
    n_a, n_s, _ = c.shape
    colsums = c.sum(axis=1)
    B = np.zeros_like(c)
    for a in range(n_a):
        seen = colsums[a] > 0
        B[a][:, seen] = c[a][:, seen] / colsums[a][seen]
        missing = np.flatnonzero(~seen)
        B[a][missing, missing] = 1.0
    return B
