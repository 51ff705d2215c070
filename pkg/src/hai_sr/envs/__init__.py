"""Benchmark environments: noisy gridworlds, mountain car, point mazes."""

from __future__ import annotations

from importlib import resources

from .gridworld import (
    DOWN,
    GOAL_REWARD,
    LEFT,
    PICKUP,
    RIGHT,
    STEP_REWARD,
    UP,
    GridSpec,
    Gridworld,
    parse_layout,
)
from .mountain_car import MountainCar, MountainCarSpec, mc_discretize, mc_step
from .pointmaze import (
    DIRECTIONS,
    EVENT_BIN,
    EVENT_BLOCKED,
    EVENT_EXHAUSTED,
    EVENT_GOAL,
    PointMaze,
    PointMazeSpec,
)

__all__ = [
    "DIRECTIONS",
    "DOWN",
    "EVENT_BIN",
    "EVENT_BLOCKED",
    "EVENT_EXHAUSTED",
    "EVENT_GOAL",
    "GOAL_REWARD",
    "GridSpec",
    "Gridworld",
    "LEFT",
    "MountainCar",
    "MountainCarSpec",
    "PICKUP",
    "PointMaze",
    "PointMazeSpec",
    "RIGHT",
    "STEP_REWARD",
    "UP",
    "five_rooms",
    "four_rooms",
    "key_grid",
    "layout_text",
    "mc_discretize",
    "mc_step",
    "mountain_car",
    "parse_layout",
    "pointmaze",
    "serpentine",
]


def layout_text(name: str) -> str:
    """Read a bundled layout file by basename (without extension)."""
    path = resources.files(__package__) / "layouts" / f"{name}.txt"
    return path.read_text()


def serpentine(noise_eta: float = 0.0) -> Gridworld:
    return Gridworld(parse_layout(layout_text("serpentine9"), noise_eta=noise_eta))


def four_rooms(noise_eta: float = 0.0) -> Gridworld:
    return Gridworld(parse_layout(layout_text("four_rooms9"), noise_eta=noise_eta))


def five_rooms(noise_eta: float = 0.0, region_eta: float = 0.1) -> Gridworld:
    """Five-room cycle whose top-right room has its own observation noise."""
    return Gridworld(
        parse_layout(
            layout_text("five_rooms9"), noise_eta=noise_eta, region_eta=region_eta
        )
    )


def key_grid(noise_eta: float = 0.0) -> Gridworld:
    return Gridworld(parse_layout(layout_text("key5"), noise_eta=noise_eta))


def mountain_car(**kwargs) -> MountainCar:
    return MountainCar(MountainCarSpec(**kwargs))


_PM_BINS = {"umaze": (20, 20), "medium": (32, 32), "large": (48, 36)}


def pointmaze(name: str = "umaze", **kwargs) -> PointMaze:
    if name not in _PM_BINS:
        raise ValueError(f"unknown maze {name!r}; choose from {sorted(_PM_BINS)}")
    grid = tuple(layout_text(f"pm_{name}").splitlines())
    bx, by = _PM_BINS[name]
    return PointMaze(PointMazeSpec(grid=grid, bins_x=bx, bins_y=by, **kwargs))
