"""Metric rows, CSV round-tripping, and the return-stability score."""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

CSV_HEADER = (
    "experiment,seed,episode,reward,steps,planning_decisions,success,"
    "sr_dist_micro,sr_dist_macro"
)


@dataclass(frozen=True)
class MetricRow:
    experiment: str
    seed: int
    episode: int
    reward: float
    steps: float
    planning_decisions: float
    success: float
    sr_dist_micro: float
    sr_dist_macro: float


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


class MetricSeries:
    """Ordered collection of metric rows with deterministic CSV output."""

    def __init__(self, rows=None):
        self.rows = list(rows) if rows is not None else []

    def append(self, row: MetricRow):
        self.rows.append(row)

    def extend(self, rows):
        self.rows.extend(rows)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def filtered(self, experiment=None, seed=None) -> "MetricSeries":
        out = [
            r
            for r in self.rows
            if (experiment is None or r.experiment == experiment)
            and (seed is None or r.seed == seed)
        ]
        return MetricSeries(out)

    def rewards(self) -> np.ndarray:
        return np.array([r.reward for r in self.rows], dtype=float)

    def sorted(self) -> "MetricSeries":
        return MetricSeries(
            sorted(self.rows, key=lambda r: (r.experiment, r.seed, r.episode))
        )

    def to_csv(self, path: str):
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(_fmt(getattr(r, f.name)) for f in fields(MetricRow))
            )
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @staticmethod
    def from_csv(path: str) -> "MetricSeries":
        series = MetricSeries()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != CSV_HEADER:
                raise ValueError(f"unexpected metrics header in {path}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                series.append(
                    MetricRow(
                        experiment=parts[0],
                        seed=int(parts[1]),
                        episode=int(parts[2]),
                        reward=float(parts[3]),
                        steps=float(parts[4]),
                        planning_decisions=float(parts[5]),
                        success=float(parts[6]),
                        sr_dist_micro=float(parts[7]),
                        sr_dist_macro=float(parts[8]),
                    )
                )
        return series


def r_stability(returns, window_fraction: float = 0.25) -> float:
    """Average normalized shortfall from the best return, final window.

    RS = mean over the last window_fraction of the series of
    (R_best - R_t) / (R_best - R_min + 1e-9), with the best and worst taken
    over the whole series.  Lies in [0, 1]; 0 means the final window sits
    at the global maximum.
    """
    r = np.asarray(returns, dtype=float)
    if r.size == 0:
        raise ValueError("empty return series")
    if not (0.0 < window_fraction <= 1.0):
        raise ValueError("window_fraction must lie in (0, 1]")
    n_w = max(1, int(round(window_fraction * r.size)))
    best = r.max()
    worst = r.min()
    tail = r[r.size - n_w:]
    return float(np.mean((best - tail) / (best - worst + 1e-9)))
