"""Macro-state discovery on top of a learned successor representation.

States are grouped by spectral clustering of an affinity matrix derived from
the successor matrix (optionally blended with a spatial kernel for
discretized continuous tasks).  Transitions between groups observed in
trajectories define bottleneck states, and a navigation policy is learned for
each bottleneck by greedy ascent on a temporary goal-score field.  The
resulting macro-level transition matrix, successor matrix, and aggregated
EFE scores support planning over groups instead of raw states.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core_model import GenerativeModel, Trajectory, _freeze, clamped_log, make_preference
from .successor import SuccessorMatrix, goal_scores


class MacroLearningError(RuntimeError):
    """Raised when a macro policy cannot cover its source cluster."""


@dataclass(frozen=True)
class AffinityMatrix:
    """Symmetric non-negative affinity between micro states."""

    W: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "W", _freeze(self.W))
        if self.W.ndim != 2 or self.W.shape[0] != self.W.shape[1]:
            raise ValueError("affinity must be square")
        if not np.allclose(self.W, self.W.T, atol=1e-10):
            raise ValueError("affinity must be symmetric")
        if np.any(self.W < 0):
            raise ValueError("affinity must be non-negative")


def sr_affinity(M: np.ndarray) -> AffinityMatrix:
    """Symmetrize a successor matrix and min-max normalize it to [0, 1].

    A constant M has no structure to normalize; it degrades to the identity
    affinity.
    """
    M = np.asarray(M, dtype=float)
    S = np.maximum(M, M.T)
    lo, hi = S.min(), S.max()
    if hi - lo <= 0:
        return AffinityMatrix(np.eye(M.shape[0]))
    return AffinityMatrix((S - lo) / (hi - lo))


def spatial_rbf(coords: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Gaussian kernel exp(-d^2 / (2 sigma^2)) on pairwise distances."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim != 2:
        raise ValueError("coords must be (n_states, dims)")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    sq = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-sq / (2.0 * sigma**2))


def adaptive_blend(
    sr_norm: np.ndarray, kernel: np.ndarray, row_sums: np.ndarray, alpha_max: float
) -> AffinityMatrix:
    """Mix SR affinity with a spatial kernel, leaning on the kernel wherever
    the SR rows are weakly learned.

    Per-state confidence is the row sum scaled by the best-learned row; a
    pair's kernel weight is alpha_max * (1 - min of the two confidences).
    """
    sr_norm = np.asarray(sr_norm, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    row_sums = np.asarray(row_sums, dtype=float)
    if not (0.0 <= alpha_max <= 1.0):
        raise ValueError("alpha_max must lie in [0, 1]")
    rmax = row_sums.max() if row_sums.size else 0.0
    if rmax > 0:
        conf = row_sums / rmax
    else:
        conf = np.zeros_like(row_sums)
    pair_conf = np.minimum.outer(conf, conf)
    alpha = alpha_max * (1.0 - pair_conf)
    return AffinityMatrix((1.0 - alpha) * sr_norm + alpha * kernel)


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X[first]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = X[idx]
        d2 = np.minimum(d2, ((X - centers[i]) ** 2).sum(axis=1))
    return centers


def _kmeans_once(X: np.ndarray, k: int, rng: np.random.Generator, iters: int = 300):
    centers = _kmeans_pp_init(X, k, rng)
    labels = np.zeros(X.shape[0], dtype=np.int64)
    for _ in range(iters):
        dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(dists, axis=1)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = X[mask].mean(axis=0)
            else:
                # revive an empty cluster at the point farthest from its center
                worst = int(np.argmax(dists[np.arange(len(X)), new_labels]))
                centers[c] = X[worst]
                new_labels[worst] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    dists = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(dists, axis=1)
    inertia = float(dists[np.arange(len(X)), labels].sum())
    return labels, inertia


def _canonical_labels(labels: np.ndarray, k: int) -> np.ndarray:
    """Relabel clusters in order of first appearance by state index."""
    mapping = {}
    out = np.empty_like(labels)
    nxt = 0
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = nxt
            nxt += 1
        out[i] = mapping[lab]
    if nxt < k:
        # clusters that never appear keep indices above the used range
        pass
    return out


def spectral_cluster(affinity: AffinityMatrix, k: int, seed: int = 0, restarts: int = 20):
    """Cluster states via the symmetric-normalized graph Laplacian.

    Returns (labels, embedding) where the embedding holds the row-normalized
    eigenvectors for the k smallest eigenvalues and labels come from k-means
    (k-means++ seeding, best of `restarts` runs, ties resolved canonically by
    lowest state index).
    """
    W = affinity.W
    n = W.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}]")
    if k == 1:
        return np.zeros(n, dtype=np.int64), np.ones((n, 1))
    d = W.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, 1e-300)), 0.0)
    L = np.eye(n) - (inv_sqrt[:, None] * W) * inv_sqrt[None, :]
    L = 0.5 * (L + L.T)
    vals, vecs = scipy.linalg.eigh(L)
    embedding = vecs[:, :k].copy()
    norms = np.linalg.norm(embedding, axis=1)
    nz = norms > 0
    embedding[nz] = embedding[nz] / norms[nz, None]
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        labels, inertia = _kmeans_once(embedding, k, rng)
        if best is None or inertia < best[1] - 1e-12:
            best = (labels, inertia)
    return _canonical_labels(best[0], k), embedding


def find_bottlenecks(traj: Trajectory, labels: np.ndarray) -> dict:
    """Entry states of observed cluster-to-cluster crossings.

    For each ordered pair (i, j) with at least one crossing, returns the
    most frequently entered first state inside j (lowest state index on
    ties).
    """
    labels = np.asarray(labels)
    counts: dict = {}
    lab_s = labels[traj.states]
    lab_n = labels[traj.next_states]
    crossing = lab_s != lab_n
    for s_next, li, lj in zip(
        traj.next_states[crossing], lab_s[crossing], lab_n[crossing]
    ):
        key = (int(li), int(lj))
        bucket = counts.setdefault(key, {})
        bucket[int(s_next)] = bucket.get(int(s_next), 0) + 1
    out = {}
    for key, bucket in counts.items():
        best_state = min(bucket, key=lambda s: (-bucket[s], s))
        out[key] = best_state
    return out


@dataclass(frozen=True)
class PolicyMap:
    """First greedy action toward a bottleneck, per covered micro state."""

    action_of: dict
    target_bottleneck: int

    def __post_init__(self):
        object.__setattr__(self, "action_of", dict(self.action_of))


def learn_macro_policy(
    model: GenerativeModel,
    sr: SuccessorMatrix,
    source_states,
    bottleneck: int,
) -> PolicyMap:
    """Greedy navigation policy from every source state to a bottleneck.

    Plants a temporary preference on the bottleneck's most likely
    observation and scores states by nu' = M (max(g') - g').  Routing runs
    on each action's exit edge, its most likely state-changing transition:
    holding an action until the state changes is what executing the policy
    does, so in-place probability mass is not a dead end.  A backward
    breadth-first pass from the bottleneck layers the exit graph by hop
    count; each reachable source then follows a chain of strictly
    layer-decreasing actions, taking the highest expected nu among them, so
    a route may pass through locally worse states when the dynamics demand
    it (momentum tasks).  Source states with no exit path to the bottleneck
    are left out of the policy's domain (the planner falls back to one-step
    greed there).  Raises when no source can reach the bottleneck at all.
    """
    source_states = [int(s) for s in np.asarray(source_states, dtype=int)]
    goal_obs = int(np.argmax(model.A[:, bottleneck]))
    temp = model.replace_preference(make_preference(model.n_obs, goal_obs))
    log_A = clamped_log(temp.A)
    log_C = clamped_log(temp.C)
    g = (temp.A * (log_A - log_C[:, None])).sum(axis=0) - (temp.A * log_A).sum(axis=0)
    nu = sr.M @ goal_scores(g)
    ev = np.einsum("aij,i->aj", model.B, nu)
    B_out = model.B.copy()
    for a in range(B_out.shape[0]):
        np.fill_diagonal(B_out[a], 0.0)
    step_out = np.argmax(B_out, axis=1)
    exit_mass = B_out.max(axis=1)

    dist = _exit_distances(step_out, exit_mass, bottleneck)
    plannable = [s for s in source_states if np.isfinite(dist[s])]
    if not any(s != bottleneck for s in plannable):
        raise MacroLearningError(
            f"no source state has a path to state {bottleneck}"
        )

    n_a = model.B.shape[0]
    action_of: dict = {}
    for start in plannable:
        s = int(start)
        while s != bottleneck and s not in action_of:
            best_a, best_v = -1, -np.inf
            for a in range(n_a):
                if exit_mass[a, s] <= 1e-6:
                    continue
                if dist[int(step_out[a, s])] != dist[s] - 1.0:
                    continue
                if ev[a, s] > best_v:
                    best_a, best_v = a, float(ev[a, s])
            action_of[s] = best_a
            s = int(step_out[best_a, s])
    return PolicyMap(action_of=action_of, target_bottleneck=int(bottleneck))


def _exit_distances(step_out: np.ndarray, exit_mass: np.ndarray,
                    target: int, tol: float = 1e-6) -> np.ndarray:
    """Fewest exit-edge hops from every state to `target`, inf off-path.

    Backward breadth-first search over the graph whose edge per (action,
    state) is that action's most likely state-changing transition.
    """
    n_a, n = step_out.shape
    heads: dict = {}
    for a in range(n_a):
        for s in range(n):
            if exit_mass[a, s] > tol:
                heads.setdefault(int(step_out[a, s]), []).append(s)
    dist = np.full(n, np.inf)
    dist[int(target)] = 0.0
    frontier = deque([int(target)])
    while frontier:
        t = frontier.popleft()
        for s in heads.get(t, ()):
            if not np.isfinite(dist[s]):
                dist[s] = dist[t] + 1.0
                frontier.append(s)
    return dist


def collapse_labels(traj: Trajectory, labels: np.ndarray) -> list:
    """Macro-state visit runs with consecutive duplicates removed.

    Episode seams inside the trajectory are detected where states stop
    chaining (next_state of one transition differs from the state of the
    next); each contiguous segment contributes its own collapsed run, so no
    macro transition is ever counted across a seam.
    """
    labels = np.asarray(labels)
    runs: list = []
    cur: list = []
    prev_next = None
    for s, s2 in zip(traj.states, traj.next_states):
        if prev_next is None or s != prev_next:
            if cur:
                runs.append(np.asarray(cur, dtype=np.int64))
            cur = [int(labels[s])]
        if int(labels[s2]) != cur[-1]:
            cur.append(int(labels[s2]))
        prev_next = s2
    if cur:
        runs.append(np.asarray(cur, dtype=np.int64))
    return runs


def build_macro_model(
    traj: Trajectory,
    labels: np.ndarray,
    g_micro: np.ndarray,
    gamma: float,
    alpha: float,
):
    """Macro transition matrix, macro successor matrix, and aggregated EFE.

    The macro chain is the collapsed label sequence (self-transitions
    excluded).  B_macro rows are normalized crossing counts with self-loops
    for macro states that never cross out; M_macro is TD-learned along the
    collapsed sequence, with unvisited rows pinned to the self-loop solution
    onehot / (1 - gamma); G_macro sums the per-state EFE within each cluster.
    """
    labels = np.asarray(labels)
    g_micro = np.asarray(g_micro, dtype=float)
    k = int(labels.max()) + 1 if labels.size else 0
    runs = collapse_labels(traj, labels)
    counts = np.zeros((k, k), dtype=np.int64)
    M = np.eye(k)
    touched = np.zeros(k, dtype=bool)
    for run in runs:
        for idx in range(len(run) - 1):
            i, j = int(run[idx]), int(run[idx + 1])
            counts[i, j] += 1
            touched[i] = True
            target = gamma * M[j, :]
            M[i, :] += alpha * (target - M[i, :])
            M[i, j] += alpha
    B_macro = np.zeros((k, k))
    for i in range(k):
        row_total = counts[i].sum()
        if row_total > 0:
            B_macro[i] = counts[i] / row_total
        else:
            B_macro[i, i] = 1.0
    for i in range(k):
        if not touched[i]:
            M[i, :] = 0.0
            M[i, i] = 1.0 / (1.0 - gamma)
    G_macro = np.zeros(k)
    for j in range(k):
        G_macro[j] = g_micro[labels == j].sum()
    return B_macro, M, G_macro


@dataclass(frozen=True)
class MacroDecomposition:
    """Everything the hierarchical planner needs about the macro level."""

    k: int
    labels: np.ndarray
    embedding: np.ndarray
    bottlenecks: dict
    macro_policies: dict
    B_macro: np.ndarray
    M_macro: np.ndarray
    G_macro: np.ndarray
    C_macro: np.ndarray
    ambiguity_macro: np.ndarray = None
    gamma: float = 0.95

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        for name in ("embedding", "B_macro", "M_macro", "G_macro", "C_macro"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))
        if self.ambiguity_macro is None:
            object.__setattr__(self, "ambiguity_macro", _freeze(np.zeros(self.k)))
        else:
            object.__setattr__(self, "ambiguity_macro", _freeze(self.ambiguity_macro))
        valid = self.labels[self.labels >= 0]
        if valid.size and valid.max() >= self.k:
            raise ValueError("label exceeds cluster count")
        if self.B_macro.shape != (self.k, self.k):
            raise ValueError("B_macro must be k x k")
        if not np.allclose(self.B_macro.sum(axis=1), 1.0, atol=1e-8):
            raise ValueError("B_macro rows must sum to 1")

    def replace_preference(self, C_macro: np.ndarray) -> "MacroDecomposition":
        return MacroDecomposition(
            k=self.k,
            labels=self.labels,
            embedding=self.embedding,
            bottlenecks=self.bottlenecks,
            macro_policies=self.macro_policies,
            B_macro=self.B_macro,
            M_macro=self.M_macro,
            G_macro=self.G_macro,
            C_macro=C_macro,
            ambiguity_macro=self.ambiguity_macro,
            gamma=self.gamma,
        )


def macro_preference(k: int, goal_cluster: int, mass: float = 0.99) -> np.ndarray:
    """Macro-level preference: `mass` on the goal cluster, rest smeared."""
    return make_preference(k, goal_cluster, mass)
