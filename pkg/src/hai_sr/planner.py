"""Flat and hierarchical action selection on top of learned models.

The flat controller scores every primitive action by the efe-value of its
predicted successor and never looks further ahead.  The hierarchical
controller moves between the clusters of a MacroDecomposition: one planning
decision picks the next macro action (a cached cluster-to-cluster policy)
whose primitive actions are then looked up for free until the cluster
boundary; a final decision on entering the goal cluster builds a greedy
action field that is followed to the goal without further planning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .abstraction import MacroDecomposition, PolicyMap, macro_preference
from .core_model import (
    Belief,
    GenerativeModel,
    Trajectory,
    belief_update,
    clamped_log,
    efe_vector,
    initial_belief,
    make_preference,
    policy_posterior,
)
from .successor import EfeValueFunction, SuccessorMatrix, efe_value, goal_scores


@dataclass
class AgentState:
    """Mutable controller state carried across the steps of one episode.

    current_macro is the cluster the agent occupied when the pending macro
    action was selected; it doubles as the drift detector (leaving it means
    the macro action finished or derailed).
    """

    belief: Belief
    current_macro: int | None = None
    pending_policy: PolicyMap | None = None
    goal_policy: PolicyMap | None = None
    planning_decisions: int = 0
    steps_taken: int = 0


def _nu_array(nu) -> np.ndarray:
    return nu.nu if isinstance(nu, EfeValueFunction) else np.asarray(nu)


def flat_step(model: GenerativeModel, sr: SuccessorMatrix, nu, belief: Belief,
              rng: np.random.Generator | None = None, sample: bool = False) -> int:
    """Primitive action with the best expected efe-value one step ahead.

    Evaluates each action from the argmax-belief state; ties break to the
    lowest action index.  With sample=True the action is drawn from the
    posterior over the per-action efe instead of the argmax.
    """
    values = _nu_array(nu)
    s = belief.argmax
    ev = model.B[:, :, s] @ values
    if sample:
        if rng is None:
            raise ValueError("sampling needs an rng")
        probs = policy_posterior(-ev)
        return int(rng.choice(len(ev), p=probs))
    return int(np.argmax(ev))


def macro_values(decomp: MacroDecomposition) -> np.ndarray:
    """Efe-value of each cluster under the macro preference.

    Cluster cost is the surprise of its preference mass plus the summed
    observation ambiguity of its members, so the score does not scale with
    cluster size the way raw per-state efe sums would.
    """
    g_m = -clamped_log(decomp.C_macro) + decomp.ambiguity_macro
    return decomp.M_macro @ goal_scores(g_m)


def greedy_policy_map(model: GenerativeModel, nu, states,
                      step_to: np.ndarray | None = None) -> PolicyMap:
    """One-step-greedy action field over the given states."""
    values = _nu_array(nu)
    if step_to is None:
        step_to = np.argmax(model.B, axis=1)
    action_of = {
        int(s): int(np.argmax(values[step_to[:, int(s)]]))
        for s in np.asarray(states)
    }
    return PolicyMap(action_of=action_of, target_bottleneck=-1)


def choose_macro(decomp: MacroDecomposition, from_cluster: int) -> int | None:
    """Best learned macro action out of a cluster, lowest index on ties.

    A candidate destination is scored by its own preference score plus the
    discounted macro efe-value from there: the successor matrix counts only
    clusters after arrival, so without the arrival term a transit neighbor
    of the goal cluster could outrank the goal cluster itself.
    """
    g_m = -clamped_log(decomp.C_macro) + decomp.ambiguity_macro
    gs_m = goal_scores(g_m)
    score = gs_m + decomp.gamma * (decomp.M_macro @ gs_m)
    best, best_v = None, -np.inf
    for (i, j) in sorted(decomp.macro_policies):
        if i == from_cluster and score[j] > best_v:
            best, best_v = j, score[j]
    return best


def hierarchical_step(
    model: GenerativeModel,
    decomp: MacroDecomposition,
    agent: AgentState,
    goal_cluster: int,
    nu=None,
    step_to: np.ndarray | None = None,
) -> tuple:
    """One primitive action under macro-level control; returns (action, agent).

    Planning decisions increment when a macro action is (re)selected and
    once when the goal-cluster action field is built; cached lookups in
    between are free.  States a cached policy never visited fall back to
    one-step greed on the micro efe-value.
    """
    if nu is None:
        raise ValueError("hierarchical_step needs the micro efe-value nu")
    values = _nu_array(nu)
    if step_to is None:
        step_to = np.argmax(model.B, axis=1)
    s = agent.belief.argmax
    lbl = int(decomp.labels[s])
    if lbl == goal_cluster:
        agent.current_macro = None
        agent.pending_policy = None
        if agent.goal_policy is None:
            members = np.flatnonzero(decomp.labels == goal_cluster)
            agent.goal_policy = greedy_policy_map(model, values, members, step_to)
            agent.planning_decisions += 1
        a = agent.goal_policy.action_of.get(s)
        if a is None:
            a = int(np.argmax(values[step_to[:, s]]))
        return a, agent
    arrived = (
        agent.pending_policy is not None
        and s == agent.pending_policy.target_bottleneck
    )
    if agent.current_macro != lbl or agent.pending_policy is None or arrived:
        target = choose_macro(decomp, lbl)
        agent.planning_decisions += 1
        agent.current_macro = lbl
        if target is None:
            agent.pending_policy = None
        else:
            agent.pending_policy = decomp.macro_policies[(lbl, target)]
    if agent.pending_policy is None:
        return int(np.argmax(values[step_to[:, s]])), agent
    a = agent.pending_policy.action_of.get(s)
    if a is None:
        a = int(np.argmax(values[step_to[:, s]]))
    return a, agent


def replan_goal(
    model: GenerativeModel,
    decomp: MacroDecomposition,
    new_goal_obs: int,
    mass: float = 0.99,
) -> tuple:
    """Re-aim a model and decomposition at a new goal observation.

    Only the preferences C and C_macro are rebuilt; dynamics, successor
    structure, clusters, and macro policies are reused untouched.  Returns
    (model, decomp, goal_cluster).
    """
    model2 = model.replace_preference(
        make_preference(model.n_obs, new_goal_obs, mass=mass)
    )
    likely_state = int(np.argmax(model.A[new_goal_obs, :]))
    goal_cluster = int(decomp.labels[likely_state])
    decomp2 = decomp.replace_preference(
        macro_preference(decomp.k, goal_cluster, mass=mass)
    )
    return model2, decomp2, goal_cluster


@dataclass(frozen=True)
class EpisodeResult:
    total_reward: float
    steps: int
    planning_decisions: int
    success: bool
    trajectory: Trajectory | None = None


def run_episode(
    env,
    kind: str,
    *,
    rng: np.random.Generator,
    step_cap: int,
    model: GenerativeModel | None = None,
    sr: SuccessorMatrix | None = None,
    decomp: MacroDecomposition | None = None,
    goal_cluster: int | None = None,
    qtable=None,
    q_train: bool = False,
    collect: bool = False,
    start_state: int | None = None,
    reset_kwargs: dict | None = None,
    sample: bool = False,
) -> EpisodeResult:
    """Roll out one episode with the requested controller.

    kind is one of "random", "flat", "hierarchical", "q".  q_train=True
    runs epsilon-greedy with online updates on the given QTable; otherwise
    "q" acts greedily.  collect=True returns the transitions as a
    Trajectory.
    """
    kwargs = dict(reset_kwargs or {})
    if start_state is not None:
        kwargs["start_state"] = start_state
    state, obs = env.reset(rng, **kwargs)
    noisy = bool(getattr(env, "noisy", False))

    agent = None
    nu = None
    step_to = None
    if kind in ("flat", "hierarchical"):
        if model is None or sr is None:
            raise ValueError(f"{kind} controller needs a model and an sr")
        nu = efe_value(sr, efe_vector(model)).nu
        if noisy:
            belief = initial_belief(model, obs)
        else:
            b = np.zeros(model.n_states)
            b[state] = 1.0
            belief = Belief(b=b, step=0)
        agent = AgentState(belief=belief)
        if kind == "hierarchical":
            if decomp is None or goal_cluster is None:
                raise ValueError("hierarchical controller needs a decomposition")
            step_to = np.argmax(model.B, axis=1)

    states, actions, next_states, observations, rewards = [], [], [], [], []
    total = 0.0
    steps = 0
    success = False
    for _ in range(step_cap):
        if kind == "random":
            a = int(rng.integers(env.n_actions))
        elif kind == "q":
            from .baselines import epsilon_greedy

            if q_train:
                a = epsilon_greedy(qtable, state, rng)
            else:
                a = int(np.argmax(qtable.q[state]))
        elif kind == "flat":
            a = flat_step(model, sr, nu, agent.belief, rng=rng, sample=sample)
            agent.planning_decisions += 1
        else:
            a, agent = hierarchical_step(
                model, decomp, agent, goal_cluster, nu=nu, step_to=step_to
            )
        s2, obs2, r, done = env.step(a, rng)
        total += r
        steps += 1
        if collect:
            states.append(state)
            actions.append(a)
            next_states.append(s2)
            observations.append(obs2)
            rewards.append(r)
        if kind == "q" and q_train:
            from .baselines import q_update

            q_update(qtable, state, a, r, s2, done=done)
        if agent is not None:
            if noisy:
                agent.belief = belief_update(model, agent.belief, a, obs2)
            else:
                b = np.zeros(model.n_states)
                b[s2] = 1.0
                agent.belief = Belief(b=b, step=agent.belief.step + 1)
            agent.steps_taken += 1
        state, obs = s2, obs2
        if done:
            success = True
            break

    traj = None
    if collect:
        traj = Trajectory(
            states=np.asarray(states, dtype=np.int64),
            actions=np.asarray(actions, dtype=np.int64),
            next_states=np.asarray(next_states, dtype=np.int64),
            observations=np.asarray(observations, dtype=np.int64),
            rewards=np.asarray(rewards, dtype=float),
        )
    decisions = agent.planning_decisions if agent is not None else (
        steps if kind == "q" else 0
    )
    return EpisodeResult(
        total_reward=total,
        steps=steps,
        planning_decisions=decisions,
        success=success,
        trajectory=traj,
    )
