"""Command-line entry point.

Subcommands: train, eval, cluster, replan, sweep, plot, list-experiments.
Exit codes: 0 success, 2 configuration error, 3 experiment failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .artifact import load_artifact, save_artifact
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_hash,
    load_config,
)
from .experiments import describe, experiment_config, experiment_ids
from .metrics import MetricSeries
from .outputs import (
    emit_outputs,
    plot_clusters,
    plot_learning_curves,
    write_clusters_csv,
    write_policy_maps_csv,
    write_sweep_csv,
)
from .runner import (
    ExperimentFailure,
    RunResult,
    TrainedBundle,
    _multigoal_rows,
    _revaluation_rows,
    diverse_start_states,
    eval_stats,
    make_env,
    run_experiment,
    sr_from_model,
    train_agent_seed,
)
from ..baselines import QTable

ARTIFACT_STATE_LIMIT = 1200


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hai-sr",
        description="Hierarchical successor-representation agents: "
        "training, evaluation, and run inspection.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="config file (key = value lines)")
        sp.add_argument("--experiment", help="preset id, see list-experiments")
        sp.add_argument(
            "--seeds", type=int, metavar="N", help="use seeds 0..N-1"
        )
        sp.add_argument("--out", help="output directory")
        sp.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            dest="overrides", help="override one config field (repeatable)",
        )

    common(sub.add_parser("train", help="run an experiment and write outputs"))
    common(sub.add_parser("eval", help="evaluate saved artifacts in --out"))
    common(sub.add_parser("cluster", help="train the substrate and write the "
                                          "state clustering"))
    common(sub.add_parser("replan", help="re-aim a trained agent at the "
                                         "configured goals without retraining"))
    common(sub.add_parser("sweep", help="noise sweep over eta_levels"))
    common(sub.add_parser("plot", help="regenerate plots from metrics.csv in "
                                       "--out"))
    sub.add_parser("list-experiments", help="list experiment presets")
    return p


def _resolve_config(args) -> ExperimentConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.experiment:
            cfg = dataclasses.replace(cfg, experiment=args.experiment)
    elif args.experiment:
        cfg = experiment_config(args.experiment)
    else:
        raise ConfigError("need --experiment or --config")
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    if args.seeds is not None:
        if args.seeds <= 0:
            raise ConfigError("--seeds must be positive")
        cfg = dataclasses.replace(cfg, seeds=tuple(range(args.seeds)))
    if args.out:
        cfg = dataclasses.replace(cfg, out=args.out)
    return cfg


def _save_bundles(cfg: ExperimentConfig, result: RunResult, out_dir: str):
    env = make_env(cfg)
    if env.n_states > ARTIFACT_STATE_LIMIT:
        print(
            f"note: {env.n_states} states exceed the artifact limit "
            f"({ARTIFACT_STATE_LIMIT}); skipping artifact write"
        )
        return
    chash = config_hash(cfg)
    for agent in sorted(result.bundles):
        b = result.bundles[agent]
        extras = {"agent": agent, "experiment": cfg.experiment}
        if b.goal_cluster is not None:
            extras["goal_cluster"] = b.goal_cluster
        save_artifact(
            os.path.join(out_dir, f"artifact_{agent}"),
            config_hash=chash,
            seed=b.seed,
            model=b.model,
            sr=b.sr,
            decomp=b.decomp,
            qtable=b.qtable.q if b.qtable is not None else None,
            extra_scalars=extras,
        )


def _cmd_train(args) -> int:
    cfg = _resolve_config(args)
    result = run_experiment(cfg, log=print)
    out_dir = cfg.out
    emit_outputs(out_dir, cfg, result, coords=make_env(cfg).coords())
    _save_bundles(cfg, result, out_dir)
    print(f"wrote {len(result.series)} metric rows to {out_dir}/metrics.csv")
    return 0


def _load_bundle(run_dir: str, agent: str, cfg: ExperimentConfig):
    data = load_artifact(os.path.join(run_dir, f"artifact_{agent}"))
    qt = None
    if data.get("qtable") is not None:
        qt = QTable(q=np.array(data["qtable"]), epsilon=0.0)
    gc = data["scalars"].get("goal_cluster")
    model = data.get("model")
    return TrainedBundle(
        agent=agent,
        seed=int(data["scalars"].get("seed", 0)),
        model=model,
        sr=data.get("sr"),
        plan_sr=sr_from_model(model, cfg) if model is not None else None,
        decomp=data.get("decomp"),
        goal_cluster=int(gc) if gc is not None else None,
        qtable=qt,
    )


def _cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    run_dir = cfg.out
    env = make_env(cfg)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed_root, 9999]))
    found = False
    for agent in cfg.agents:
        adir = os.path.join(run_dir, f"artifact_{agent}")
        if not os.path.isdir(adir):
            continue
        found = True
        bundle = _load_bundle(run_dir, agent, cfg)
        starts = (
            diverse_start_states(env) if cfg.eval_starts == "diverse" else None
        )
        stats = eval_stats(env, cfg, agent, rng, cfg.final_cap, bundle,
                           starts=starts)
        print(
            f"{agent}: reward {stats['reward']:.2f}  steps "
            f"{stats['steps']:.1f}  decisions "
            f"{stats['planning_decisions']:.1f}  success {stats['success']:.2f}"
        )
    if not found:
        raise ConfigError(f"no artifacts under {run_dir}")
    return 0


def _cmd_cluster(args) -> int:
    cfg = _resolve_config(args)
    if "hierarchical" not in cfg.agents:
        raise ConfigError("clustering needs the hierarchical agent")
    _, bundle = train_agent_seed(cfg, "hierarchical", cfg.seeds[0])
    if bundle.decomp is None:
        raise ExperimentFailure("no decomposition was built; raise episodes")
    out_dir = cfg.out
    os.makedirs(out_dir, exist_ok=True)
    write_clusters_csv(
        bundle.decomp.labels, bundle.decomp.embedding,
        os.path.join(out_dir, "clusters.csv"),
    )
    write_policy_maps_csv(
        bundle.decomp, os.path.join(out_dir, "policy_maps.csv")
    )
    plot_clusters(
        make_env(cfg).coords(), bundle.decomp.labels,
        os.path.join(out_dir, "clusters.svg"),
    )
    sizes = [
        int((bundle.decomp.labels == j).sum()) for j in range(bundle.decomp.k)
    ]
    print(f"k = {bundle.decomp.k}, cluster sizes = {sizes}")
    print(f"wrote clusters.csv, policy_maps.csv, clusters.svg to {out_dir}")
    return 0


def _cmd_replan(args) -> int:
    cfg = _resolve_config(args)
    goals = cfg.goal_cells()
    if not goals:
        raise ConfigError("replan needs goals (--set goals=r,c;r,c)")
    grid_env = not (
        cfg.env == "mountain_car" or cfg.env.startswith("pointmaze_")
    )
    if cfg.env == "mountain_car":
        raise ConfigError("replan applies to grid and maze tasks")
    seed = cfg.seeds[0]
    for agent in cfg.agents:
        if agent not in ("hierarchical", "flat"):
            continue
        _, bundle = train_agent_seed(cfg, agent, seed)
        rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed_root, seed, 77])
        )
        if grid_env:
            rows = _revaluation_rows(cfg, agent, seed, bundle, rng)
            by_goal: dict = {}
            for r in rows:
                gi = (r["episode"] - cfg.episodes - 1) // cfg.switch_cap + 1
                by_goal.setdefault(gi, []).append(r)
            for gi, cell in enumerate(goals, start=1):
                block = by_goal.get(gi, [])
                hit = next((i + 1 for i, r in enumerate(block)
                            if r["success"] >= 1.0), None)
                outcome = (
                    f"first success on episode {hit}" if hit else "no success"
                )
                print(f"{agent} goal {cell}: {outcome}")
        else:
            rows = _multigoal_rows(cfg, agent, seed, bundle, rng)
            for r, cell in zip(rows, goals):
                print(
                    f"{agent} goal {cell}: success {r['success']:.2f} "
                    f"steps {r['steps']:.1f} decisions "
                    f"{r['planning_decisions']:.1f}"
                )
    return 0


def _cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    if not cfg.eta_levels:
        raise ConfigError("sweep needs eta_levels in the config")
    result = run_experiment(cfg, log=print)
    out_dir = cfg.out
    os.makedirs(out_dir, exist_ok=True)
    write_sweep_csv(result.sweep, os.path.join(out_dir, "sweep.csv"))
    by_level: dict = {}
    for r in result.sweep:
        by_level.setdefault(r["level"], []).append(r)
    print("level  eta    room_entropy  p_short")
    for level in sorted(by_level):
        rs = by_level[level]
        eta = rs[0]["eta"]
        ent = float(np.mean([r["room_entropy"] for r in rs]))
        p = float(np.mean([r["p_short"] for r in rs]))
        print(f"{level:<6d} {eta:<6.3g} {ent:<13.4f} {p:.3f}")
    print(f"wrote sweep.csv to {out_dir}")
    return 0


def _cmd_plot(args) -> int:
    cfg = _resolve_config(args)
    out_dir = cfg.out
    metrics = os.path.join(out_dir, "metrics.csv")
    if not os.path.isfile(metrics):
        raise ConfigError(f"no metrics.csv under {out_dir}")
    series = MetricSeries.from_csv(metrics)
    plot_learning_curves(series, os.path.join(out_dir, "learning_curves.svg"))
    made = ["learning_curves.svg"]
    clusters = os.path.join(out_dir, "clusters.csv")
    if os.path.isfile(clusters):
        labels = []
        with open(clusters, "r", encoding="utf-8") as fh:
            fh.readline()
            for line in fh:
                if line.strip():
                    labels.append(int(line.split(",")[1]))
        coords = make_env(cfg).coords()
        if coords.shape[0] == len(labels):
            plot_clusters(
                coords, np.asarray(labels),
                os.path.join(out_dir, "clusters.svg"),
            )
            made.append("clusters.svg")
    print(f"wrote {', '.join(made)} to {out_dir}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "list-experiments":
        for eid in experiment_ids():
            print(f"{eid:<10s} {describe(eid)}")
        return 0
    handlers = {
        "train": _cmd_train,
        "eval": _cmd_eval,
        "cluster": _cmd_cluster,
        "replan": _cmd_replan,
        "sweep": _cmd_sweep,
        "plot": _cmd_plot,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ExperimentFailure as e:
        print(f"experiment failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
