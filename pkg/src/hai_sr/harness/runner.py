"""Experiment protocols: substrate training, evaluation cadence, and the
special phases (distance sweeps, goal switching, multi-goal tables, noise
sweeps) that sit on top of a trained agent.

Randomness discipline: every (agent, seed) worker derives its own generator
streams from SeedSequence([seed_root, seed, stream]) so results do not depend
on scheduling; rows are sorted by (experiment, seed, episode) before writing.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..abstraction import (
    MacroDecomposition,
    MacroLearningError,
    adaptive_blend,
    build_macro_model,
    find_bottlenecks,
    learn_macro_policy,
    macro_preference,
    spatial_rbf,
    spectral_cluster,
    sr_affinity,
)
from ..baselines import QTable, epsilon_schedule
from ..core_model import (
    GenerativeModel,
    Trajectory,
    TransitionCounts,
    efe_vector,
    entropy,
    learn_transitions,
    make_preference,
    normalize_counts,
)
from ..envs import Gridworld, MountainCar, PointMaze
from ..envs import (
    five_rooms,
    four_rooms,
    key_grid,
    mountain_car,
    pointmaze,
    serpentine,
)
from ..planner import run_episode
from ..successor import SuccessorMatrix, analytic_sr, default_transition, sr_distance, td_update_path
from .config import ConfigError, ExperimentConfig
from .metrics import MetricRow, MetricSeries

STREAM_EXPLORE = 0
STREAM_EVAL = 1
STREAM_CLUSTER = 2
STREAM_Q = 3
STREAM_SWEEP = 4
STREAM_REVAL = 5


class ExperimentFailure(RuntimeError):
    """An experiment could not complete (repeated macro-learning failures)."""


def rng_for(seed_root: int, seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed_root, seed, stream]))


def make_env(cfg: ExperimentConfig):
    name = cfg.env
    if name == "serpentine":
        return serpentine(noise_eta=cfg.noise_eta)
    if name == "four_rooms":
        return four_rooms(noise_eta=cfg.noise_eta)
    if name == "five_rooms":
        return five_rooms(noise_eta=cfg.noise_eta, region_eta=cfg.region_eta)
    if name == "key_grid":
        return key_grid(noise_eta=cfg.noise_eta)
    if name == "mountain_car":
        return mountain_car()
    if name.startswith("pointmaze_"):
        return pointmaze(
            name[len("pointmaze_"):],
            n_smooth_train=cfg.n_smooth_train,
            n_smooth_test=cfg.n_smooth_test,
        )
    raise ConfigError(f"unknown env {name!r}")


def goal_observations(env) -> np.ndarray:
    """Observation indices carrying the preference mass for this task."""
    if isinstance(env, Gridworld):
        return np.asarray([env.goal_obs], dtype=np.int64)
    if isinstance(env, MountainCar):
        return np.asarray(env.goal_states(), dtype=np.int64)
    if isinstance(env, PointMaze):
        return pm_goal_observations(env, env.goal_pos)
    raise ConfigError(f"no goal definition for {type(env).__name__}")


def pm_goal_observations(env: PointMaze, goal_pos) -> np.ndarray:
    """Bins whose centers lie within the goal radius of a goal position."""
    gx, gy = goal_pos
    out = []
    for s in range(env.n_states):
        cx, cy = env.bin_center(s)
        if (cx - gx) ** 2 + (cy - gy) ** 2 <= env.spec.goal_radius**2:
            out.append(s)
    if not out:
        out = [env.discretize(goal_pos)]
    return np.asarray(out, dtype=np.int64)


def diverse_start_states(env) -> np.ndarray | None:
    """Candidate start states for spread-out evaluation, if the env supports
    direct state starts (grids only; the key layout starts without the key)."""
    if isinstance(env, Gridworld):
        return np.arange(env.n_cells, dtype=np.int64)
    return None


def _explore_reset_kwargs(env, cfg, rng) -> dict:
    if cfg.explore_starts != "diverse":
        return {}
    if isinstance(env, PointMaze):
        return {"random_start": True}
    if isinstance(env, Gridworld):
        return {"start_state": int(rng.integers(env.n_cells))}
    return {}


def explore_episode(env, cfg: ExperimentConfig, rng: np.random.Generator) -> Trajectory:
    """One uniform-random exploration episode.

    Actions are redrawn every `sticky` steps (momentum-friendly exploration
    for the car task).  In noisy environments the recorded state chain is the
    observation chain, since that is all the agent can see.
    """
    kw = _explore_reset_kwargs(env, cfg, rng)
    state, obs = env.reset(rng, **kw)
    noisy = bool(getattr(env, "noisy", False))
    cur = obs if noisy else state
    states, actions, next_states, observations, rewards = [], [], [], [], []
    a = 0
    for t in range(cfg.step_cap):
        if t % cfg.sticky == 0:
            a = int(rng.integers(env.n_actions))
        s2, o2, r, done = env.step(a, rng)
        nxt = o2 if noisy else s2
        states.append(cur)
        actions.append(a)
        next_states.append(nxt)
        observations.append(o2)
        rewards.append(r)
        cur = nxt
        if done:
            break
    return Trajectory(
        states=np.asarray(states, dtype=np.int64),
        actions=np.asarray(actions, dtype=np.int64),
        next_states=np.asarray(next_states, dtype=np.int64),
        observations=np.asarray(observations, dtype=np.int64),
        rewards=np.asarray(rewards, dtype=float),
    )


def build_model(env, counts: TransitionCounts, cfg: ExperimentConfig,
                goal_obs: np.ndarray) -> GenerativeModel:
    B = normalize_counts(counts)
    if isinstance(env, Gridworld) and env.noisy:
        A = env.likelihood()
    else:
        A = np.eye(env.n_states)
    C = make_preference(env.n_obs, goal_obs, mass=cfg.preference_mass)
    D = np.full(env.n_states, 1.0 / env.n_states)
    return GenerativeModel(A=A, B=B, C=C, D=D)


def sr_from_model(model: GenerativeModel, cfg: ExperimentConfig) -> SuccessorMatrix:
    return analytic_sr(default_transition(model.B), cfg.gamma, cfg.alpha)


def ambiguity_by_cluster(efe, labels: np.ndarray, k: int) -> np.ndarray:
    """Mean per-state observation ambiguity of each cluster.

    The mean keeps the macro cost comparable across clusters of different
    sizes; a summed version would make large rooms look noisy regardless of
    their observation model.
    """
    out = np.zeros(k, dtype=float)
    for j in range(k):
        members = labels == j
        if members.any():
            out[j] = float(efe.ambiguity[members].mean())
    return out


def build_decomposition(
    model: GenerativeModel,
    sr: SuccessorMatrix,
    traj: Trajectory,
    coords: np.ndarray,
    cfg: ExperimentConfig,
    cluster_seed: int,
    plan_sr: SuccessorMatrix | None = None,
):
    """Cluster the visited states and learn the macro level.

    Clustering reads the learned successor matrix `sr`; the macro-policy
    walks plan over `plan_sr` when given (the successor matrix implied by
    the learned transition model), which keeps short within-cluster plans
    reliable even while the sampled matrix is still noisy.  Unvisited states
    keep label -1; the planner treats them with one-step fallbacks.  Raises
    MacroLearningError when the structure is not learnable yet (too little
    coverage, unreachable bottlenecks, unvisited goal).
    """
    n = model.n_states
    visited = np.unique(np.concatenate([traj.states, traj.next_states]))
    if visited.size < cfg.k:
        raise MacroLearningError(
            f"only {visited.size} states visited, need at least k={cfg.k}"
        )
    W = sr_affinity(sr.M[np.ix_(visited, visited)])
    if cfg.alpha_max > 0.0:
        kernel = spatial_rbf(coords[visited], cfg.sigma_rbf)
        W = adaptive_blend(W.W, kernel, sr.M[visited].sum(axis=1), cfg.alpha_max)
    labels_sub, emb = spectral_cluster(W, cfg.k, seed=cluster_seed)
    labels = np.full(n, -1, dtype=np.int64)
    labels[visited] = labels_sub
    embedding = np.zeros((n, emb.shape[1]))
    embedding[visited] = emb

    bottlenecks = find_bottlenecks(traj, labels)
    walk_sr = sr if plan_sr is None else plan_sr
    policies = {}
    for (i, j), b in sorted(bottlenecks.items()):
        members = np.flatnonzero(labels == i)
        policies[(i, j)] = learn_macro_policy(model, walk_sr, members, b)

    efe = efe_vector(model)
    B_macro, M_macro, G_macro = build_macro_model(
        traj, labels, efe.g, cfg.gamma, cfg.alpha_macro
    )
    goal_state = int(np.argmin(efe.g))
    goal_cluster = int(labels[goal_state])
    if goal_cluster < 0:
        raise MacroLearningError("most-preferred state not visited yet")
    decomp = MacroDecomposition(
        k=cfg.k,
        labels=labels,
        embedding=embedding,
        bottlenecks=bottlenecks,
        macro_policies=policies,
        B_macro=B_macro,
        M_macro=M_macro,
        G_macro=G_macro,
        C_macro=macro_preference(cfg.k, goal_cluster, cfg.preference_mass),
        ambiguity_macro=ambiguity_by_cluster(efe, labels, cfg.k),
        gamma=cfg.gamma,
    )
    return decomp, goal_cluster


def replace_ambiguity(decomp: MacroDecomposition, amb: np.ndarray) -> MacroDecomposition:
    return MacroDecomposition(
        k=decomp.k,
        labels=decomp.labels,
        embedding=decomp.embedding,
        bottlenecks=decomp.bottlenecks,
        macro_policies=decomp.macro_policies,
        B_macro=decomp.B_macro,
        M_macro=decomp.M_macro,
        G_macro=decomp.G_macro,
        C_macro=decomp.C_macro,
        ambiguity_macro=amb,
        gamma=decomp.gamma,
    )


def lumped_true_sr(T_true: np.ndarray, labels: np.ndarray, k: int,
                   gamma: float) -> SuccessorMatrix:
    """Reference macro successor matrix: lump the true micro dynamics by the
    current labels, drop self-transitions, and solve in closed form."""
    Tm = np.zeros((k, k))
    for i in range(k):
        members = labels == i
        if not members.any():
            continue
        rows = T_true[members]
        for j in range(k):
            Tm[i, j] = rows[:, labels == j].sum(axis=1).mean()
    np.fill_diagonal(Tm, 0.0)
    sums = Tm.sum(axis=1)
    for i in range(k):
        if sums[i] > 0:
            Tm[i] /= sums[i]
        else:
            Tm[i, i] = 1.0
    return analytic_sr(Tm, gamma)


@dataclass
class TrainedBundle:
    """Everything one (agent, seed) run learned, for reuse and persistence."""

    agent: str
    seed: int
    model: GenerativeModel | None = None
    sr: SuccessorMatrix | None = None
    plan_sr: SuccessorMatrix | None = None
    decomp: MacroDecomposition | None = None
    goal_cluster: int | None = None
    qtable: QTable | None = None
    visited: np.ndarray | None = None


def _pm_test_mode(env):
    if isinstance(env, PointMaze):
        env.n_smooth = env.spec.n_smooth_test


def _pm_train_mode(env):
    if isinstance(env, PointMaze):
        env.n_smooth = env.spec.n_smooth_train


def eval_stats(
    env,
    cfg: ExperimentConfig,
    kind: str,
    rng: np.random.Generator,
    cap: int,
    bundle: TrainedBundle,
    starts: np.ndarray | None = None,
    reset_kwargs: dict | None = None,
    n_episodes: int | None = None,
    collect: bool = False,
) -> dict:
    """Frozen-policy evaluation block; returns mean metrics over episodes.

    A hierarchical agent without a decomposition yet falls back to flat
    control so early-cadence rows still measure something real.
    """
    n_eps = cfg.eval_episodes if n_episodes is None else n_episodes
    run_kind = kind
    if kind == "hierarchical" and bundle.decomp is None:
        run_kind = "flat"
    sr_eval = bundle.sr
    if run_kind == "hierarchical" and bundle.plan_sr is not None:
        sr_eval = bundle.plan_sr
    _pm_test_mode(env)
    rewards = np.empty(n_eps)
    steps = np.empty(n_eps)
    decisions = np.empty(n_eps)
    succ = 0
    trajectories = []
    for i in range(n_eps):
        start = None
        if starts is not None and len(starts):
            start = int(starts[int(rng.integers(len(starts)))])
        res = run_episode(
            env,
            run_kind,
            rng=rng,
            step_cap=cap,
            model=bundle.model,
            sr=sr_eval,
            decomp=bundle.decomp,
            goal_cluster=bundle.goal_cluster,
            qtable=bundle.qtable,
            start_state=start,
            reset_kwargs=reset_kwargs,
            collect=collect,
        )
        rewards[i] = res.total_reward
        steps[i] = res.steps
        decisions[i] = res.planning_decisions
        succ += int(res.success)
        if collect:
            trajectories.append(res.trajectory)
    _pm_train_mode(env)
    out = {
        "reward": float(rewards.mean()),
        "steps": float(steps.mean()),
        "planning_decisions": float(decisions.mean()),
        "success": succ / n_eps,
    }
    if collect:
        out["trajectories"] = trajectories
    return out


def _row(tag, seed, episode, stats, sr_micro=0.0, sr_macro=0.0) -> dict:
    return dict(
        experiment=tag,
        seed=seed,
        episode=episode,
        reward=stats["reward"],
        steps=stats["steps"],
        planning_decisions=stats["planning_decisions"],
        success=stats["success"],
        sr_dist_micro=float(sr_micro),
        sr_dist_macro=float(sr_macro),
    )


def _boundaries(cfg: ExperimentConfig):
    pts = list(range(cfg.eval_every, cfg.episodes + 1, cfg.eval_every))
    if not pts or pts[-1] != cfg.episodes:
        pts.append(cfg.episodes)
    return pts


def train_agent_seed(cfg: ExperimentConfig, agent: str, seed: int):
    """Run the training protocol for one (agent, seed) pair.

    Returns (row dicts, TrainedBundle).  SR agents alternate random
    exploration with frozen greedy evaluation; the hierarchical agent builds
    its decomposition after the warm-up and refreshes it periodically,
    keeping the last good decomposition whenever a refresh fails and raising
    ExperimentFailure only if none was ever built.  Q-learning rows report
    the returns of its own training episodes, which is what the reference
    curves for that baseline show; it has no frozen-model phase.
    """
    env = make_env(cfg)
    rng_x = rng_for(cfg.seed_root, seed, STREAM_EXPLORE)
    rng_e = rng_for(cfg.seed_root, seed, STREAM_EVAL)
    rng_c = rng_for(cfg.seed_root, seed, STREAM_CLUSTER)
    rng_q = rng_for(cfg.seed_root, seed, STREAM_Q)
    tag = f"{cfg.experiment}:{agent}"
    rows: list = []
    bundle = TrainedBundle(agent=agent, seed=seed)
    eval_starts = (
        diverse_start_states(env) if cfg.eval_starts == "diverse" else None
    )
    eval_reset = (
        {"random_start": True}
        if cfg.eval_starts == "diverse" and isinstance(env, PointMaze)
        else None
    )

    if agent == "random":
        for ep in _boundaries(cfg):
            stats = eval_stats(
                env, cfg, "random", rng_e, cfg.eval_cap, bundle,
                starts=eval_starts, reset_kwargs=eval_reset,
            )
            rows.append(_row(tag, seed, ep, stats))
        return rows, bundle

    if agent == "qlearning":
        qt = QTable.zeros(
            env.n_states, env.n_actions,
            alpha_q=cfg.q_alpha, gamma_q=cfg.q_gamma, epsilon=cfg.q_eps_start,
        )
        bundle.qtable = qt
        for ep in range(1, cfg.episodes + 1):
            qt.epsilon = epsilon_schedule(
                ep - 1, cfg.episodes, cfg.q_eps_start, cfg.q_eps_end
            )
            run_episode(
                env, "q", rng=rng_q, step_cap=cfg.step_cap,
                qtable=qt, q_train=True,
            )
            if (ep % cfg.eval_every == 0) or ep == cfg.episodes:
                stats = eval_stats(
                    env, cfg, "q", rng_e, cfg.eval_cap, bundle,
                    starts=eval_starts, reset_kwargs=eval_reset,
                )
                rows.append(_row(tag, seed, ep, stats))
        return rows, bundle

    # ----------------------------------------------------- successor agents
    counts = TransitionCounts.zeros(env.n_actions, env.n_states)
    sr = SuccessorMatrix.identity(env.n_states, cfg.gamma, cfg.alpha)
    model = None
    plan_sr = None
    decomp = None
    goal_cluster = None
    failures = 0
    last_error = None
    next_refresh = max(1, int(round(cfg.warmup_frac * cfg.episodes)))
    goal_obs = goal_observations(env)
    coords = env.coords()
    grid = isinstance(env, Gridworld)
    truth = None
    T_true = None
    if grid:
        T_true = env.default_transition_true()
        truth = analytic_sr(T_true, cfg.gamma)
    snapshots: list = []  # (row index, M copy, M_macro copy or None)
    traj_parts: list = []

    for ep in range(1, cfg.episodes + 1):
        t = explore_episode(env, cfg, rng_x)
        traj_parts.append(t)
        counts = learn_transitions(counts, t)
        if cfg.sr_mode == "td":
            sr = td_update_path(sr, t.states, t.next_states)
        boundary = (ep % cfg.eval_every == 0) or ep == cfg.episodes
        want_build = agent == "hierarchical" and ep >= next_refresh
        if boundary or want_build:
            model = build_model(env, counts, cfg, goal_obs)
            if cfg.sr_mode == "analytic":
                sr = sr_from_model(model, cfg)
                plan_sr = sr
            else:
                plan_sr = sr_from_model(model, cfg)
        if want_build:
            try:
                decomp, goal_cluster = build_decomposition(
                    model, sr, Trajectory.concat(traj_parts), coords, cfg,
                    int(rng_c.integers(2**31 - 1)), plan_sr=plan_sr,
                )
                next_refresh = ep + cfg.refresh_every
            except MacroLearningError as e:
                # keep any earlier decomposition and try again later
                failures += 1
                last_error = e
                next_refresh = ep + cfg.eval_every
        if boundary:
            bundle.model, bundle.sr, bundle.plan_sr = model, sr, plan_sr
            bundle.decomp, bundle.goal_cluster = decomp, goal_cluster
            stats = eval_stats(
                env, cfg, agent, rng_e, cfg.eval_cap, bundle,
                starts=eval_starts, reset_kwargs=eval_reset,
            )
            if grid:
                micro = sr_distance(sr, truth)
                macro = 0.0
                if decomp is not None:
                    macro = float(
                        np.linalg.norm(
                            decomp.M_macro
                            - lumped_true_sr(T_true, decomp.labels, cfg.k, cfg.gamma).M
                        )
                        / cfg.k
                    )
                rows.append(_row(tag, seed, ep, stats, micro, macro))
            else:
                snapshots.append(
                    (len(rows), sr.M.copy(),
                     decomp.M_macro.copy() if decomp is not None else None)
                )
                rows.append(_row(tag, seed, ep, stats))

    if agent == "hierarchical" and decomp is None:
        raise ExperimentFailure(
            f"{tag} seed {seed}: no decomposition after {cfg.episodes} "
            f"episodes ({failures} failed attempts, last: {last_error})"
        )

    if snapshots:
        M_final = sr.M
        Mm_final = decomp.M_macro if decomp is not None else None
        for idx, M, Mm in snapshots:
            rows[idx]["sr_dist_micro"] = float(
                np.linalg.norm(M - M_final) / M.shape[0]
            )
            if Mm is not None and Mm_final is not None and Mm.shape == Mm_final.shape:
                rows[idx]["sr_dist_macro"] = float(
                    np.linalg.norm(Mm - Mm_final) / Mm.shape[0]
                )

    bundle.model, bundle.sr, bundle.plan_sr = model, sr, plan_sr
    bundle.decomp, bundle.goal_cluster = decomp, goal_cluster
    if traj_parts:
        whole = Trajectory.concat(traj_parts)
        bundle.visited = np.unique(
            np.concatenate([whole.states, whole.next_states])
        )
    return rows, bundle


# ------------------------------------------------------------ special phases


def _distance_rows(cfg: ExperimentConfig, agent: str, seed: int,
                   bundle: TrainedBundle, rng: np.random.Generator) -> list:
    """Evaluate the trained agent from starts at fixed distances to the goal.

    Starts are restricted to states the training run actually visited, so the
    sweep measures planning range rather than behavior on states the agent
    has never seen.
    """
    env = make_env(cfg)
    goal = env.goal_state
    dist = np.asarray(
        [env.bfs_steps_states(s, goal) for s in range(env.n_states)]
    )
    tag = f"{cfg.experiment}:{agent}:dist"
    rows = []
    for d in cfg.distances:
        candidates = np.flatnonzero(dist == int(d))
        if bundle.visited is not None:
            candidates = np.intersect1d(candidates, bundle.visited)
        if candidates.size == 0:
            continue
        stats = eval_stats(
            env, cfg, agent, rng, cfg.eval_cap, bundle, starts=candidates
        )
        rows.append(_row(tag, seed, int(d), stats))
    return rows


def _revaluation_rows(cfg: ExperimentConfig, agent: str, seed: int,
                      bundle: TrainedBundle, rng: np.random.Generator) -> list:
    """Goal-switch phase on a gridworld.

    Each switch block emits one row per episode until the first success (or
    the block budget runs out): successor agents re-aim their preferences and
    run frozen evaluations, Q-learning keeps training on the moved goal.
    """
    if agent == "random":
        return []
    env = make_env(cfg)
    rows = []
    tag = f"{cfg.experiment}:{agent}:switch"
    for gi, cell in enumerate(cfg.goal_cells(), start=1):
        env2 = env.with_goal(cell)
        base = cfg.episodes + (gi - 1) * cfg.switch_cap
        if agent == "qlearning":
            qt = bundle.qtable
            qt.epsilon = cfg.q_eps_start
            for j in range(1, cfg.switch_cap + 1):
                res = run_episode(
                    env2, "q", rng=rng, step_cap=cfg.step_cap,
                    qtable=qt, q_train=True,
                )
                rows.append(_row(tag, seed, base + j, {
                    "reward": res.total_reward,
                    "steps": float(res.steps),
                    "planning_decisions": float(res.planning_decisions),
                    "success": float(res.success),
                }))
                if res.success:
                    break
            continue
        new_obs = int(env2.goal_obs)
        model2 = bundle.model.replace_preference(
            make_preference(bundle.model.n_obs, new_obs, cfg.preference_mass)
        )
        decomp2 = None
        gc2 = None
        if agent == "hierarchical" and bundle.decomp is not None:
            state = int(np.argmax(model2.A[new_obs, :]))
            gc2 = int(bundle.decomp.labels[state])
            decomp2 = bundle.decomp.replace_preference(
                macro_preference(bundle.decomp.k, gc2, cfg.preference_mass)
            )
        shadow = TrainedBundle(
            agent=agent, seed=seed, model=model2, sr=bundle.sr,
            plan_sr=bundle.plan_sr, decomp=decomp2, goal_cluster=gc2,
        )
        for j in range(1, cfg.switch_cap + 1):
            stats = eval_stats(
                env2, cfg, agent, rng, cfg.eval_cap, shadow, n_episodes=1
            )
            rows.append(_row(tag, seed, base + j, stats))
            if stats["success"] >= 1.0:
                break
    return rows


def _multigoal_rows(cfg: ExperimentConfig, agent: str, seed: int,
                    bundle: TrainedBundle, rng: np.random.Generator) -> list:
    """Per-goal replanning table on a point maze: no retraining, fresh
    preferences per goal, a few frozen episodes from the start cell."""
    env = make_env(cfg)
    tag = f"{cfg.experiment}:{agent}:goal"
    rows = []
    n_eps = 3
    for gi, cell in enumerate(cfg.goal_cells(), start=1):
        env.set_goal(cell=cell)
        goal_obs = pm_goal_observations(env, env.goal_pos)
        model2 = bundle.model.replace_preference(
            make_preference(bundle.model.n_obs, goal_obs, cfg.preference_mass)
        )
        decomp2 = None
        gc2 = None
        if agent == "hierarchical" and bundle.decomp is not None:
            s_goal = env.discretize(env.goal_pos)
            gc2 = int(bundle.decomp.labels[s_goal])
            if gc2 < 0:
                efe = efe_vector(model2)
                labeled = np.flatnonzero(bundle.decomp.labels >= 0)
                s_goal = int(labeled[np.argmin(efe.g[labeled])])
                gc2 = int(bundle.decomp.labels[s_goal])
            decomp2 = bundle.decomp.replace_preference(
                macro_preference(bundle.decomp.k, gc2, cfg.preference_mass)
            )
        shadow = TrainedBundle(
            agent=agent, seed=seed, model=model2, sr=bundle.sr,
            plan_sr=bundle.plan_sr, decomp=decomp2, goal_cluster=gc2,
        )
        stats = eval_stats(
            env, cfg, agent, rng, cfg.final_cap, shadow, n_episodes=n_eps
        )
        rows.append(_row(tag, seed, gi, stats))
    return rows


def _sweep_rows(cfg: ExperimentConfig, seed: int, bundle: TrainedBundle,
                rng: np.random.Generator):
    """Noisy-room sweep on the five-room layout.

    For each room-noise level the likelihood and the cluster ambiguities are
    rebuilt (dynamics, successor matrices, clusters, and policies are reused)
    and the frozen hierarchical agent is evaluated; an episode counts as
    taking the short path when it enters the noisy room.
    """
    if bundle.decomp is None or bundle.model is None:
        raise ExperimentFailure("noise sweep needs a trained decomposition")
    base = make_env(cfg)
    region = base.region_states()
    rows = []
    sweep = []
    tag = f"{cfg.experiment}:hierarchical:sweep"
    for li, eta in enumerate(cfg.eta_levels, start=1):
        env2 = base.with_noise(cfg.noise_eta, region_eta=float(eta))
        A2 = env2.likelihood()
        model2 = GenerativeModel(
            A=A2, B=bundle.model.B, C=bundle.model.C, D=bundle.model.D
        )
        efe2 = efe_vector(model2)
        decomp2 = replace_ambiguity(
            bundle.decomp,
            ambiguity_by_cluster(efe2, bundle.decomp.labels, bundle.decomp.k),
        )
        shadow = TrainedBundle(
            agent="hierarchical", seed=seed, model=model2, sr=bundle.sr,
            plan_sr=bundle.plan_sr, decomp=decomp2,
            goal_cluster=bundle.goal_cluster,
        )
        stats = eval_stats(
            env2, cfg, "hierarchical", rng, cfg.eval_cap, shadow,
            n_episodes=cfg.sweep_episodes, collect=True,
        )
        trajs = stats.pop("trajectories")
        short = 0
        for t in trajs:
            if np.isin(t.states, region).any() or np.isin(t.next_states, region).any():
                short += 1
        room_entropy = float(
            np.mean([entropy(A2[:, s]) for s in region])
        )
        rows.append(_row(tag, seed, li, stats))
        sweep.append({
            "seed": seed,
            "level": li,
            "eta": float(eta),
            "room_entropy": room_entropy,
            "p_short": short / max(1, len(trajs)),
            "episodes": len(trajs),
        })
    return rows, sweep


# --------------------------------------------------------------- experiment


@dataclass
class RunResult:
    series: MetricSeries
    bundles: dict = field(default_factory=dict)
    sweep: list = field(default_factory=list)


def run_seed_task(cfg: ExperimentConfig, agent: str, seed: int):
    rows, bundle = train_agent_seed(cfg, agent, seed)
    sweep: list = []
    env_kind_grid = not (
        cfg.env == "mountain_car" or cfg.env.startswith("pointmaze_")
    )
    if cfg.distances and agent in ("hierarchical", "flat"):
        rng = rng_for(cfg.seed_root, seed, STREAM_EVAL + 100)
        rows += _distance_rows(cfg, agent, seed, bundle, rng)
    goals = cfg.goal_cells()
    if goals:
        rng = rng_for(cfg.seed_root, seed, STREAM_REVAL)
        if env_kind_grid:
            rows += _revaluation_rows(cfg, agent, seed, bundle, rng)
        elif cfg.env.startswith("pointmaze_") and agent in ("hierarchical", "flat"):
            rows += _multigoal_rows(cfg, agent, seed, bundle, rng)
    if cfg.eta_levels and agent == "hierarchical":
        if cfg.env != "five_rooms":
            raise ConfigError("noise sweeps need the five_rooms layout")
        rng = rng_for(cfg.seed_root, seed, STREAM_SWEEP)
        extra, sweep = _sweep_rows(cfg, seed, bundle, rng)
        rows += extra
    return rows, bundle, sweep


def run_experiment(cfg: ExperimentConfig, log=None) -> RunResult:
    """Run every (agent, seed) task of an experiment and collect the rows.

    HAI_SR_THREADS caps worker threads (default 1); each task owns its RNG
    streams so the row set is identical regardless of scheduling.
    """
    tasks = [(agent, seed) for agent in cfg.agents for seed in cfg.seeds]
    workers = max(1, int(os.environ.get("HAI_SR_THREADS", "1")))
    results = {}
    if workers == 1:
        for agent, seed in tasks:
            results[(agent, seed)] = run_seed_task(cfg, agent, seed)
            if log:
                log(f"[{cfg.experiment}] {agent} seed {seed} done")
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                (agent, seed): pool.submit(run_seed_task, cfg, agent, seed)
                for agent, seed in tasks
            }
            for key, fut in futures.items():
                results[key] = fut.result()
                if log:
                    log(f"[{cfg.experiment}] {key[0]} seed {key[1]} done")

    all_rows: list = []
    bundles: dict = {}
    sweep_all: list = []
    for agent, seed in tasks:
        rows, bundle, sweep = results[(agent, seed)]
        all_rows.extend(rows)
        sweep_all.extend(sweep)
        if seed == cfg.seeds[0]:
            bundles[agent] = bundle
    series = MetricSeries([MetricRow(**d) for d in all_rows]).sorted()
    sweep_all.sort(key=lambda r: (r["seed"], r["level"]))
    return RunResult(series=series, bundles=bundles, sweep=sweep_all)


def goal_revaluation(cfg: ExperimentConfig) -> MetricSeries:
    """Goal-switching study; requires at least two goals in the config."""
    if len(cfg.goal_cells()) < 2:
        raise ConfigError("goal revaluation needs at least two goals")
    return run_experiment(cfg).series


def entropy_sweep(cfg: ExperimentConfig, eta_levels=None) -> list:
    """Noise sweep on five_rooms; returns per-seed, per-level summary rows."""
    if eta_levels is not None:
        import dataclasses

        cfg = dataclasses.replace(cfg, eta_levels=tuple(eta_levels))
    if not cfg.eta_levels:
        raise ConfigError("entropy sweep needs eta_levels")
    return run_experiment(cfg).sweep
