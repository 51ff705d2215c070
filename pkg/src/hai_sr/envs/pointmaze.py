"""Physics-lite point-mass mazes on standard benchmark layouts.

The maze is a grid of unit cells ('#' walls); the point mass lives in
continuous coordinates x in [-cols/2, cols/2], y in [-rows/2, rows/2] with
row 0 at the top.  Motion is fully damped: each sub-step displaces the point
by step_size along one of eight unit directions, with wall collisions
stopping the normal component (sliding).  A discrete action repeats sub-steps
until the occupied bin changes, the goal sphere is entered, or n_smooth
sub-steps elapse.

States discretize the arena on an n_x by n_y grid aligned with cell edges;
the flat index is bin_x * n_y + bin_y with closed upper edges.  Rewards are
-1 per discrete step and +100 on the step that enters the goal radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIRECTIONS = np.array(
    [
        (1.0, 0.0),
        (math.sqrt(0.5), math.sqrt(0.5)),
        (0.0, 1.0),
        (-math.sqrt(0.5), math.sqrt(0.5)),
        (-1.0, 0.0),
        (-math.sqrt(0.5), -math.sqrt(0.5)),
        (0.0, -1.0),
        (math.sqrt(0.5), -math.sqrt(0.5)),
    ]
)

STEP_REWARD = -1.0
GOAL_REWARD = 100.0

EVENT_BIN = "bin"
EVENT_GOAL = "goal"
EVENT_EXHAUSTED = "exhausted"
EVENT_BLOCKED = "blocked"


@dataclass(frozen=True)
class PointMazeSpec:
    grid: tuple
    bins_x: int
    bins_y: int
    step_size: float = 0.0024
    goal_radius: float = 0.35
    n_smooth_train: int = 200
    n_smooth_test: int = 100

    def __post_init__(self):
        rows = len(self.grid)
        cols = len(self.grid[0])
        if any(len(r) != cols for r in self.grid):
            raise ValueError("ragged maze rows")
        if self.bins_x % cols or self.bins_y % rows:
            raise ValueError("bins must align with cell edges")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")

    @property
    def rows(self) -> int:
        return len(self.grid)

    @property
    def cols(self) -> int:
        return len(self.grid[0])


def _find_cell(grid, ch):
    for i, row in enumerate(grid):
        j = row.find(ch)
        if j >= 0:
            return (i, j)
    return None


class PointMaze:
    """Steppable maze with analytic smooth-step simulation."""

    def __init__(self, spec: PointMazeSpec):
        self.spec = spec
        self.rows, self.cols = spec.rows, spec.cols
        self.half_x = self.cols / 2.0
        self.half_y = self.rows / 2.0
        self.wx = self.cols / spec.bins_x
        self.wy = self.rows / spec.bins_y
        self.n_states = spec.bins_x * spec.bins_y
        self.n_obs = self.n_states
        self.n_actions = len(DIRECTIONS)
        self._wall = np.array(
            [[ch == "#" for ch in row] for row in spec.grid], dtype=bool
        )
        self.start_cell = _find_cell(spec.grid, "S")
        self.goal_cell = _find_cell(spec.grid, "G")
        self.n_smooth = spec.n_smooth_train
        self._pos = (0.0, 0.0)
        self._goal = self.cell_center(self.goal_cell) if self.goal_cell else None

    # ----------------------------------------------------------------- geometry

    def wall_at(self, x: float, y: float) -> bool:
        j = int(math.floor(x + self.half_x))
        i = int(math.floor(self.half_y - y))
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            return True
        return bool(self._wall[i, j])

    def cell_center(self, cell) -> tuple:
        i, j = cell
        return (j + 0.5 - self.half_x, self.half_y - i - 0.5)

    def discretize(self, pos) -> int:
        x, y = pos
        bx = min(int(math.floor((x + self.half_x) / self.wx)), self.spec.bins_x - 1)
        by = min(int(math.floor((y + self.half_y) / self.wy)), self.spec.bins_y - 1)
        bx = max(bx, 0)
        by = max(by, 0)
        return bx * self.spec.bins_y + by

    def bin_center(self, state: int) -> tuple:
        bx, by = divmod(state, self.spec.bins_y)
        return (-self.half_x + (bx + 0.5) * self.wx, -self.half_y + (by + 0.5) * self.wy)

    def navigable_states(self) -> np.ndarray:
        out = []
        for s in range(self.n_states):
            x, y = self.bin_center(s)
            if not self.wall_at(x, y):
                out.append(s)
        return np.asarray(out, dtype=np.int64)

    def coords(self) -> np.ndarray:
        """Normalized bin-center coordinates for every state."""
        centers = np.asarray([self.bin_center(s) for s in range(self.n_states)])
        lo = centers.min(axis=0)
        span = centers.max(axis=0) - lo
        span[span == 0] = 1.0
        return (centers - lo) / span

    def free_cells(self) -> list:
        return [
            (i, j)
            for i in range(self.rows)
            for j in range(self.cols)
            if not self._wall[i, j]
        ]

    # --------------------------------------------------------------- simulation

    def _substeps_to_bin_edge(self, x, y, dx, dy, h):
        """Fewest sub-steps after which the straight path leaves its bin."""
        best = math.inf
        gx = x + self.half_x
        if dx > 0:
            edge = (math.floor(gx / self.wx) + 1) * self.wx
            best = min(best, math.ceil((edge - gx) / (h * dx) - 1e-12))
        elif dx < 0:
            edge = math.floor(gx / self.wx) * self.wx
            if gx == edge:
                best = min(best, 1)
            else:
                best = min(best, math.floor((gx - edge) / (h * -dx) + 1e-12) + 1)
        gy = y + self.half_y
        if dy > 0:
            edge = (math.floor(gy / self.wy) + 1) * self.wy
            best = min(best, math.ceil((edge - gy) / (h * dy) - 1e-12))
        elif dy < 0:
            edge = math.floor(gy / self.wy) * self.wy
            if gy == edge:
                best = min(best, 1)
            else:
                best = min(best, math.floor((gy - edge) / (h * -dy) + 1e-12) + 1)
        return max(1, best if best < math.inf else 10**9)

    def _substeps_to_goal(self, x, y, dx, dy, h, goal):
        """Smallest sub-step count whose sampled position enters the goal."""
        if goal is None:
            return 10**9
        px, py = x - goal[0], y - goal[1]
        a = h * h * (dx * dx + dy * dy)
        if a == 0:
            return 10**9
        b = 2.0 * h * (dx * px + dy * py)
        c = px * px + py * py - self.spec.goal_radius**2
        disc = b * b - 4 * a * c
        if disc < 0:
            return 10**9
        root = math.sqrt(disc)
        k1 = (-b - root) / (2 * a)
        k2 = (-b + root) / (2 * a)
        lo = max(1, math.ceil(k1 - 1e-12))
        if lo <= k2 + 1e-12:
            return lo
        return 10**9

    def smooth_step(self, pos, action: int, n_smooth: int, goal=None):
        """Repeat one direction until the bin changes, the goal is entered,
        motion is fully blocked, or n_smooth sub-steps elapse.

        Returns (position, sub_steps_used, event).
        """
        h = self.spec.step_size
        dx, dy = DIRECTIONS[action]
        x, y = pos
        s0 = self.discretize(pos)
        used = 0
        while used < n_smooth:
            if dx == 0.0 and dy == 0.0:
                return (x, y), used, EVENT_BLOCKED
            k_bin = self._substeps_to_bin_edge(x, y, dx, dy, h)
            k_goal = self._substeps_to_goal(x, y, dx, dy, h, goal)
            k = min(k_bin, k_goal, n_smooth - used)
            free = k - 1
            if free > 0:
                x += free * h * dx
                y += free * h * dy
                used += free
            # one manual sub-step with per-axis wall rejection
            nx, ny = x + h * dx, y + h * dy
            slid_x = slid_y = False
            if dx != 0.0 and self.wall_at(nx, y):
                nx = x
                slid_x = True
            if dy != 0.0 and self.wall_at(nx, ny):
                ny = y
                slid_y = True
            used += 1
            if nx == x and ny == y:
                return (x, y), used, EVENT_BLOCKED
            x, y = nx, ny
            if goal is not None:
                gdx, gdy = x - goal[0], y - goal[1]
                if gdx * gdx + gdy * gdy <= self.spec.goal_radius**2:
                    return (x, y), used, EVENT_GOAL
            if self.discretize((x, y)) != s0:
                return (x, y), used, EVENT_BIN
            if slid_x:
                dx = 0.0
            if slid_y:
                dy = 0.0
        return (x, y), used, EVENT_EXHAUSTED

    # ----------------------------------------------------------------- episodes

    def set_goal(self, cell=None, pos=None):
        if pos is not None:
            self._goal = (float(pos[0]), float(pos[1]))
        elif cell is not None:
            self._goal = self.cell_center(cell)
        else:
            raise ValueError("need a cell or a position")

    @property
    def goal_pos(self):
        return self._goal

    def reset(self, rng: np.random.Generator, pos=None, random_start: bool = False):
        if pos is not None:
            self._pos = (float(pos[0]), float(pos[1]))
        elif random_start:
            cells = self.free_cells()
            i, j = cells[int(rng.integers(len(cells)))]
            cx, cy = self.cell_center((i, j))
            self._pos = (
                cx + float(rng.uniform(-0.45, 0.45)),
                cy + float(rng.uniform(-0.45, 0.45)),
            )
        else:
            self._pos = self.cell_center(self.start_cell)
        s = self.discretize(self._pos)
        return s, s

    def step(self, action: int, rng: np.random.Generator = None):
        self._pos, _, event = self.smooth_step(
            self._pos, action, self.n_smooth, self._goal
        )
        s = self.discretize(self._pos)
        if event == EVENT_GOAL:
            return s, s, GOAL_REWARD, True
        return s, s, STEP_REWARD, False

    @property
    def noisy(self) -> bool:
        return False
