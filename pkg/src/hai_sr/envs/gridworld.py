"""Gridworld tasks: plain navigation, key-and-door, and noisy observations.

Layouts are small text grids: '#' wall, '.' open, 'S' start, 'G' goal,
'K' key, 'N' an open cell belonging to the designated noisy region.  States
index navigable cells in row-major order; the key variant doubles the state
space with a key-held bit and adds a fifth pickup action.

Movement is deterministic: the four move actions shift one cell (blocked
moves stay in place) and every step costs -0.1 except the transition onto
the goal (with the key where one exists), which pays +100 and terminates.

Observation noise is over locations: a state emits its own observation with
probability 1 - eta and spreads eta evenly over its open 4-neighbours.
Cells inside the noisy region may use their own eta.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace

import numpy as np

LEFT, RIGHT, UP, DOWN, PICKUP = 0, 1, 2, 3, 4
_MOVES = {LEFT: (0, -1), RIGHT: (0, 1), UP: (-1, 0), DOWN: (1, 0)}

STEP_REWARD = -0.1
GOAL_REWARD = 100.0


@dataclass(frozen=True)
class GridSpec:
    """Declarative description of a gridworld layout."""

    height: int
    width: int
    walls: frozenset
    start: tuple
    goal: tuple
    key: tuple | None = None
    noise_eta: float = 0.0
    noisy_region: frozenset = frozenset()
    region_eta: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.noise_eta < 1.0):
            raise ValueError("noise_eta must lie in [0, 1)")
        if self.region_eta is not None and not (0.0 <= self.region_eta < 1.0):
            raise ValueError("region_eta must lie in [0, 1)")
        for name in ("start", "goal"):
            cell = getattr(self, name)
            if cell in self.walls or not self._inside(cell):
                raise ValueError(f"{name} cell {cell} is not navigable")
        if self.key is not None and (self.key in self.walls or not self._inside(self.key)):
            raise ValueError("key cell is not navigable")

    def _inside(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width


def parse_layout(
    text: str, noise_eta: float = 0.0, region_eta: float | None = None
) -> GridSpec:
    """Build a GridSpec from layout text; validates start-goal reachability."""
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError("ragged layout rows")
    walls, region = set(), set()
    start = goal = key = None
    for r, line in enumerate(rows):
        for c, ch in enumerate(line):
            cell = (r, c)
            if ch == "#":
                walls.add(cell)
            elif ch == "S":
                start = cell
            elif ch == "G":
                goal = cell
            elif ch == "K":
                key = cell
            elif ch == "N":
                region.add(cell)
            elif ch != ".":
                raise ValueError(f"unknown layout character {ch!r}")
    if start is None or goal is None:
        raise ValueError("layout needs one S and one G")
    spec = GridSpec(
        height=len(rows),
        width=width,
        walls=frozenset(walls),
        start=start,
        goal=goal,
        key=key,
        noise_eta=noise_eta,
        noisy_region=frozenset(region),
        region_eta=region_eta,
    )
    grid = Gridworld(spec)
    if grid.bfs_steps(start, goal) < 0:
        raise ValueError("goal unreachable from start")
    if key is not None and grid.bfs_steps(start, key) < 0:
        raise ValueError("key unreachable from start")
    return spec


class Gridworld:
    """Indexed, steppable form of a GridSpec."""

    def __init__(self, spec: GridSpec):
        self.spec = spec
        cells = [
            (r, c)
            for r in range(spec.height)
            for c in range(spec.width)
            if (r, c) not in spec.walls
        ]
        self.cells = cells
        self._cell_index = {cell: i for i, cell in enumerate(cells)}
        self.n_cells = len(cells)
        self.has_key_state = spec.key is not None
        self.n_states = self.n_cells * (2 if self.has_key_state else 1)
        self.n_obs = self.n_states
        self.n_actions = 5 if self.has_key_state else 4
        self._next_cell = np.empty((4, self.n_cells), dtype=np.int64)
        for a, (dr, dc) in _MOVES.items():
            for i, (r, c) in enumerate(cells):
                dest = (r + dr, c + dc)
                self._next_cell[a, i] = self._cell_index.get(dest, i)
        self._A = None

    # ------------------------------------------------------------------ states

    def state_of(self, cell, has_key: bool = False) -> int:
        idx = self._cell_index[tuple(cell)]
        if has_key:
            if not self.has_key_state:
                raise ValueError("layout has no key")
            return idx + self.n_cells
        return idx

    def cell_of(self, state: int) -> tuple:
        return self.cells[state % self.n_cells]

    def key_bit(self, state: int) -> bool:
        return self.has_key_state and state >= self.n_cells

    @property
    def start_state(self) -> int:
        return self.state_of(self.spec.start, has_key=False)

    @property
    def goal_state(self) -> int:
        return self.state_of(self.spec.goal, has_key=self.has_key_state)

    @property
    def goal_obs(self) -> int:
        return self.goal_state

    def coords(self) -> np.ndarray:
        """Normalized (row, col[, key]) coordinates per state."""
        base = np.asarray(self.cells, dtype=float)
        base[:, 0] /= max(1, self.spec.height - 1)
        base[:, 1] /= max(1, self.spec.width - 1)
        if not self.has_key_state:
            return base
        no_key = np.hstack([base, np.zeros((self.n_cells, 1))])
        with_key = np.hstack([base, np.ones((self.n_cells, 1))])
        return np.vstack([no_key, with_key])

    # ----------------------------------------------------------------- dynamics

    def step_state(self, state: int, action: int):
        """Deterministic transition: returns (next_state, reward, done)."""
        if not (0 <= action < self.n_actions):
            raise ValueError(f"action {action} out of range")
        cell_idx = state % self.n_cells
        has_key = self.key_bit(state)
        if action == PICKUP:
            if not has_key and self.cells[cell_idx] == self.spec.key:
                return cell_idx + self.n_cells, STEP_REWARD, False
            return state, STEP_REWARD, False
        nxt_cell = int(self._next_cell[action, cell_idx])
        nxt = nxt_cell + (self.n_cells if has_key else 0)
        key_ok = has_key or not self.has_key_state
        if key_ok and self.cells[nxt_cell] == self.spec.goal:
            return nxt, GOAL_REWARD, True
        return nxt, STEP_REWARD, False

    def transition_tensor(self) -> np.ndarray:
        """Ground-truth column-stochastic B, one matrix per action."""
        B = np.zeros((self.n_actions, self.n_states, self.n_states))
        for a in range(self.n_actions):
            for s in range(self.n_states):
                nxt, _, _ = self.step_state(s, a)
                B[a, nxt, s] = 1.0
        return B

    def default_transition_true(self) -> np.ndarray:
        """Row-stochastic uniform-policy dynamics from the true tensor."""
        return self.transition_tensor().mean(axis=0).T

    # -------------------------------------------------------------- observations

    def _eta_of(self, cell) -> float:
        if cell in self.spec.noisy_region and self.spec.region_eta is not None:
            return self.spec.region_eta
        return self.spec.noise_eta

    def likelihood(self) -> np.ndarray:
        """Column-stochastic observation matrix A."""
        if self._A is not None:
            return self._A
        n = self.n_states
        A = np.zeros((n, n))
        for i, cell in enumerate(self.cells):
            eta = self._eta_of(cell)
            r, c = cell
            neighbours = [
                self._cell_index[(r + dr, c + dc)]
                for dr, dc in _MOVES.values()
                if (r + dr, c + dc) in self._cell_index
            ]
            if eta <= 0 or not neighbours:
                A[i, i] = 1.0
            else:
                A[i, i] = 1.0 - eta
                for j in neighbours:
                    A[j, i] += eta / len(neighbours)
        if self.has_key_state:
            full = np.zeros((n, n))
            m = self.n_cells
            full[:m, :m] = A[:m, :m]
            full[m:, m:] = A[:m, :m]
            A = full
        self._A = A
        return A

    @property
    def noisy(self) -> bool:
        return self.spec.noise_eta > 0 or (
            self.spec.region_eta is not None and len(self.spec.noisy_region) > 0
        )

    def observe(self, state: int, rng: np.random.Generator) -> int:
        if not self.noisy:
            return state
        col = self.likelihood()[:, state]
        return int(rng.choice(self.n_states, p=col))

    # ------------------------------------------------------------------ episodes

    def reset(self, rng: np.random.Generator, start_state: int | None = None):
        state = self.start_state if start_state is None else start_state
        self._state = state
        return state, self.observe(state, rng)

    def step(self, action: int, rng: np.random.Generator):
        nxt, reward, done = self.step_state(self._state, action)
        self._state = nxt
        return nxt, self.observe(nxt, rng), reward, done

    # ---------------------------------------------------------------- variations

    def with_goal(self, goal_cell) -> "Gridworld":
        return Gridworld(replace(self.spec, goal=tuple(goal_cell)))

    def with_noise(self, noise_eta: float, region_eta: float | None = None) -> "Gridworld":
        return Gridworld(
            replace(self.spec, noise_eta=noise_eta, region_eta=region_eta)
        )

    # -------------------------------------------------------------------- graphs

    def bfs_steps(self, a, b) -> int:
        """Shortest move count between two cells, or -1 if disconnected."""
        a, b = tuple(a), tuple(b)
        if a == b:
            return 0
        seen = {a}
        frontier = deque([(a, 0)])
        while frontier:
            cell, d = frontier.popleft()
            r, c = cell
            for dr, dc in _MOVES.values():
                nxt = (r + dr, c + dc)
                if nxt == b:
                    return d + 1
                if nxt in self._cell_index and nxt not in seen:
                    seen.add(nxt)
                    frontier.append((nxt, d + 1))
        return -1

    def bfs_steps_states(self, s0: int, s1: int) -> int:
        """Shortest action count between two states (key logic included)."""
        if s0 == s1:
            return 0
        seen = {s0}
        frontier = deque([(s0, 0)])
        while frontier:
            s, d = frontier.popleft()
            for a in range(self.n_actions):
                nxt, _, _ = self.step_state(s, a)
                if nxt == s1:
                    return d + 1
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append((nxt, d + 1))
        return -1

    def region_states(self) -> np.ndarray:
        """State indices lying inside the noisy region (both key layers)."""
        idx = [self._cell_index[c] for c in self.spec.noisy_region if c in self._cell_index]
        idx = sorted(idx)
        if self.has_key_state:
            idx = idx + [i + self.n_cells for i in idx]
        return np.asarray(idx, dtype=np.int64)
