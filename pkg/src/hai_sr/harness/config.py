"""Experiment configuration: a flat key=value text format with overrides.

Grammar, one entry per line:

    key = value        # trailing comments allowed

Keys are lower_snake_case.  Values parse as bool (true/false), int, float,
comma-separated lists of those, or plain strings; whitespace around tokens
is ignored.  Blank lines and lines starting with '#' are skipped.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Malformed configuration text, key, or value."""


_ENVS = (
    "serpentine",
    "four_rooms",
    "five_rooms",
    "key_grid",
    "mountain_car",
    "pointmaze_umaze",
    "pointmaze_medium",
    "pointmaze_large",
)
_AGENTS = ("hierarchical", "flat", "qlearning", "random")
_SR_MODES = ("td", "analytic")
_START_MODES = ("fixed", "diverse")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings for one experiment run (all agents, all seeds)."""

    experiment: str = "E1"
    env: str = "serpentine"
    agents: tuple = ("hierarchical", "flat", "qlearning")
    episodes: int = 1200
    step_cap: int = 200
    eval_cap: int = 200
    test_cap: int = 0            # 0: use eval_cap for final tests
    seeds: tuple = (0, 1, 2, 3, 4, 5, 6, 7, 8, 9)
    seed_root: int = 1234
    gamma: float = 0.95
    alpha: float = 0.1
    alpha_macro: float = 0.02
    k: int = 4
    noise_eta: float = 0.0
    region_eta: float = 0.1
    eta_levels: tuple = ()
    alpha_max: float = 0.0
    sigma_rbf: float = 1.0
    n_smooth_train: int = 200
    n_smooth_test: int = 100
    sr_mode: str = "td"
    explore_starts: str = "fixed"
    eval_starts: str = "fixed"
    sticky: int = 1
    eval_every: int = 25
    eval_episodes: int = 20
    warmup_frac: float = 0.1
    refresh_every: int = 100
    rs_window: float = 0.25
    preference_mass: float = 0.99
    q_alpha: float = 0.1
    q_gamma: float = 0.95
    q_eps_start: float = 0.1
    q_eps_end: float = 0.01
    goals: str = ""              # semicolon-separated r,c cells (E3/E6)
    distances: tuple = ()        # start-to-goal distances (E2)
    switch_cap: int = 40         # post-switch episode budget (E3)
    sweep_episodes: int = 50     # evaluation episodes per eta level (E7)
    out: str = "runs"

    def __post_init__(self):
        if self.env not in _ENVS:
            raise ConfigError(f"unknown env {self.env!r}")
        for a in self.agents:
            if a not in _AGENTS:
                raise ConfigError(f"unknown agent {a!r}")
        if self.sr_mode not in _SR_MODES:
            raise ConfigError(f"unknown sr_mode {self.sr_mode!r}")
        if self.explore_starts not in _START_MODES:
            raise ConfigError(f"unknown explore_starts {self.explore_starts!r}")
        if self.eval_starts not in _START_MODES:
            raise ConfigError(f"unknown eval_starts {self.eval_starts!r}")
        if not (0.0 < self.gamma < 1.0):
            raise ConfigError("gamma must lie in (0, 1)")
        if not (0.0 < self.alpha <= 1.0):
            raise ConfigError("alpha must lie in (0, 1]")
        if not (0.0 < self.alpha_macro <= 1.0):
            raise ConfigError("alpha_macro must lie in (0, 1]")
        if not (0.0 <= self.noise_eta < 1.0):
            raise ConfigError("noise_eta must lie in [0, 1)")
        if not (0.0 < self.warmup_frac <= 1.0):
            raise ConfigError("warmup_frac must lie in (0, 1]")
        if not (0.0 < self.rs_window <= 1.0):
            raise ConfigError("rs_window must lie in (0, 1]")
        if self.episodes <= 0 or self.step_cap <= 0 or self.eval_cap <= 0:
            raise ConfigError("episodes and step caps must be positive")
        if self.k <= 0:
            raise ConfigError("k must be positive")
        if self.sticky <= 0:
            raise ConfigError("sticky must be positive")
        if not self.seeds:
            raise ConfigError("need at least one seed")

    def goal_cells(self) -> list:
        """Parse the goals field into (row, col) tuples."""
        if not self.goals:
            return []
        out = []
        for part in self.goals.split(";"):
            bits = part.split(",")
            if len(bits) != 2:
                raise ConfigError(f"bad goal cell {part!r}; expected r,c")
            out.append((int(bits[0]), int(bits[1])))
        return out

    @property
    def final_cap(self) -> int:
        return self.test_cap if self.test_cap > 0 else self.eval_cap


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_scalar(text: str):
    t = text.strip()
    low = t.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        pass
    return t


def parse_value(key: str, text: str):
    """Parse one value string to the type of the matching config field."""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    default = getattr(ExperimentConfig(), key)
    t = text.strip()
    if isinstance(default, tuple):
        if not t:
            return ()
        return tuple(_parse_scalar(p) for p in t.split(","))
    if isinstance(default, bool):
        v = _parse_scalar(t)
        if not isinstance(v, bool):
            raise ConfigError(f"{key} expects true/false, got {text!r}")
        return v
    if isinstance(default, int):
        try:
            return int(t)
        except ValueError as e:
            raise ConfigError(f"{key} expects an integer, got {text!r}") from e
    if isinstance(default, float):
        try:
            return float(t)
        except ValueError as e:
            raise ConfigError(f"{key} expects a number, got {text!r}") from e
    return t


def parse_config(text: str) -> dict:
    """Parse config text into a {key: value} dict."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        out[key] = parse_value(key, val)
    return out


def format_value(v) -> str:
    if isinstance(v, tuple):
        return ",".join(format_value(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: ExperimentConfig) -> str:
    """Canonical text rendering: sorted keys, one per line."""
    d = dataclasses.asdict(cfg)
    lines = [f"{k} = {format_value(d[k])}" for k in sorted(d)]
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(format_config(cfg).encode()).hexdigest()


def apply_overrides(cfg: ExperimentConfig, pairs) -> ExperimentConfig:
    """Apply --set key=value overrides to a config."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not key=value")
        key, _, val = pair.partition("=")
        key = key.strip()
        updates[key] = parse_value(key, val)
    return dataclasses.replace(cfg, **updates)


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = parse_config(fh.read())
    try:
        return ExperimentConfig(**data)
    except TypeError as e:
        raise ConfigError(str(e)) from e
