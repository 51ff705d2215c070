"""Run outputs: CSV tables, the canonical config echo, and SVG plots.

Everything written here is byte-deterministic for a fixed config and seed
set: no timestamps, fixed float formatting, sorted iteration order.
"""

from __future__ import annotations

import os

import numpy as np

from .config import ExperimentConfig, config_hash, format_config
from .metrics import MetricSeries

PALETTE = (
    "#4477aa", "#ee6677", "#228833", "#ccbb44",
    "#66ccee", "#aa3377", "#bbbbbb", "#222222",
    "#997700", "#6699cc", "#994455", "#004488",
)
UNLABELED = "#dddddd"

SWEEP_HEADER = "seed,level,eta,room_entropy,p_short,episodes"


def _f(x: float) -> str:
    return f"{x:.3f}"


def write_sweep_csv(rows: list, path: str) -> None:
    lines = [SWEEP_HEADER]
    for r in rows:
        lines.append(
            f"{r['seed']},{r['level']},{r['eta']!r},{r['room_entropy']!r},"
            f"{r['p_short']!r},{r['episodes']}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sweep_csv(path: str) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != SWEEP_HEADER:
            raise ValueError(f"unexpected sweep header in {path}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            p = line.split(",")
            out.append({
                "seed": int(p[0]),
                "level": int(p[1]),
                "eta": float(p[2]),
                "room_entropy": float(p[3]),
                "p_short": float(p[4]),
                "episodes": int(p[5]),
            })
    return out


def write_clusters_csv(labels: np.ndarray, embedding: np.ndarray,
                       path: str) -> None:
    k_emb = embedding.shape[1]
    header = "state,label," + ",".join(f"embed_{i}" for i in range(k_emb))
    lines = [header]
    for s in range(labels.shape[0]):
        emb = ",".join(repr(float(v)) for v in embedding[s])
        lines.append(f"{s},{int(labels[s])},{emb}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_policy_maps_csv(decomp, path: str) -> None:
    lines = ["source_cluster,target_cluster,state,action,bottleneck"]
    for (i, j) in sorted(decomp.macro_policies):
        pol = decomp.macro_policies[(i, j)]
        for s in sorted(pol.action_of):
            lines.append(
                f"{i},{j},{s},{pol.action_of[s]},{pol.target_bottleneck}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ------------------------------------------------------------------ SVG plots


def _svg_open(width: int, height: int) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _axis_frame(x0, y0, x1, y1) -> str:
    return (
        f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
        'fill="none" stroke="#444444" stroke-width="1"/>'
    )


def _text(x, y, s, size=11, anchor="middle", color="#333333") -> str:
    return (
        f'<text x="{_f(x)}" y="{_f(y)}" font-family="sans-serif" '
        f'font-size="{size}" text-anchor="{anchor}" fill="{color}">{s}</text>'
    )


def _standard_tags(series: MetricSeries) -> list:
    """Tags of cadence rows ("<exp>:<agent>"), skipping phase suffixes."""
    tags = []
    for r in series:
        if r.experiment.count(":") == 1 and r.experiment not in tags:
            tags.append(r.experiment)
    return sorted(tags)


def _curve(series: MetricSeries, tag: str, metric: str):
    """Per-episode mean of one metric over seeds, sorted by episode."""
    by_ep: dict = {}
    for r in series:
        if r.experiment != tag:
            continue
        by_ep.setdefault(r.episode, []).append(getattr(r, metric))
    eps = sorted(by_ep)
    return (
        np.asarray(eps, dtype=float),
        np.asarray([np.mean(by_ep[e]) for e in eps]),
    )


def plot_learning_curves(series: MetricSeries, path: str,
                         metric: str = "reward") -> None:
    """Seed-averaged evaluation curves, one line per agent tag."""
    width, height = 640, 400
    x0, y0, x1, y1 = 60, 20, width - 20, height - 50
    tags = _standard_tags(series)
    curves = {t: _curve(series, t, metric) for t in tags}
    curves = {t: c for t, c in curves.items() if c[0].size}
    parts = _svg_open(width, height)
    parts.append(_axis_frame(x0, y0, x1, y1))
    if curves:
        all_x = np.concatenate([c[0] for c in curves.values()])
        all_y = np.concatenate([c[1] for c in curves.values()])
        xmin, xmax = float(all_x.min()), float(all_x.max())
        ymin, ymax = float(all_y.min()), float(all_y.max())
        if xmax <= xmin:
            xmax = xmin + 1.0
        if ymax <= ymin:
            ymax = ymin + 1.0

        def sx(v):
            return x0 + (v - xmin) / (xmax - xmin) * (x1 - x0)

        def sy(v):
            return y1 - (v - ymin) / (ymax - ymin) * (y1 - y0)

        for ti, tag in enumerate(sorted(curves)):
            xs, ys = curves[tag]
            color = PALETTE[ti % len(PALETTE)]
            pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(xs, ys))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                'stroke-width="1.5"/>'
            )
            parts.append(_text(
                x1 - 6, y0 + 14 + 14 * ti, tag.split(":", 1)[1],
                anchor="end", color=color,
            ))
        parts.append(_text(x0 - 8, y1 + 4, _f(ymin), anchor="end"))
        parts.append(_text(x0 - 8, y0 + 8, _f(ymax), anchor="end"))
        parts.append(_text(x0, height - 28, _f(xmin)))
        parts.append(_text(x1, height - 28, _f(xmax)))
    parts.append(_text((x0 + x1) / 2, height - 10, f"episode vs {metric}"))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def plot_clusters(coords: np.ndarray, labels: np.ndarray, path: str) -> None:
    """State scatter in environment coordinates, colored by cluster."""
    width, height = 480, 480
    pad = 30
    xs = coords[:, 0].astype(float)
    ys = coords[:, 1].astype(float)
    xmin, xmax = float(xs.min()), float(xs.max())
    ymin, ymax = float(ys.min()), float(ys.max())
    if xmax <= xmin:
        xmax = xmin + 1.0
    if ymax <= ymin:
        ymax = ymin + 1.0

    def sx(v):
        return pad + (v - xmin) / (xmax - xmin) * (width - 2 * pad)

    def sy(v):
        return height - pad - (v - ymin) / (ymax - ymin) * (height - 2 * pad)

    parts = _svg_open(width, height)
    for s in range(coords.shape[0]):
        lbl = int(labels[s])
        color = UNLABELED if lbl < 0 else PALETTE[lbl % len(PALETTE)]
        parts.append(
            f'<circle cx="{_f(sx(xs[s]))}" cy="{_f(sy(ys[s]))}" r="3.5" '
            f'fill="{color}"/>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_outputs(out_dir: str, cfg: ExperimentConfig, result,
                 coords: np.ndarray | None = None) -> None:
    """Write the full output set for one experiment run into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    result.series.to_csv(os.path.join(out_dir, "metrics.csv"))
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write(format_config(cfg))
    info = [
        f"experiment = {cfg.experiment}",
        f"config_hash = {config_hash(cfg)}",
        f"agents = {','.join(cfg.agents)}",
        f"seeds = {','.join(str(s) for s in cfg.seeds)}",
        f"rows = {len(result.series)}",
    ]
    with open(os.path.join(out_dir, "run_info.txt"), "w", encoding="utf-8",
              newline="\n") as fh:
        fh.write("\n".join(info) + "\n")
    plot_learning_curves(
        result.series, os.path.join(out_dir, "learning_curves.svg")
    )
    decomp = None
    hb = result.bundles.get("hierarchical")
    if hb is not None and hb.decomp is not None:
        decomp = hb.decomp
    if decomp is not None:
        write_clusters_csv(
            decomp.labels, decomp.embedding,
            os.path.join(out_dir, "clusters.csv"),
        )
        write_policy_maps_csv(
            decomp, os.path.join(out_dir, "policy_maps.csv")
        )
        if coords is not None:
            plot_clusters(
                coords, decomp.labels, os.path.join(out_dir, "clusters.svg")
            )
    if result.sweep:
        write_sweep_csv(result.sweep, os.path.join(out_dir, "sweep.csv"))
