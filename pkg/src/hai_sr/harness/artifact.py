"""Run artifacts: learned matrices persisted as dense text with a manifest.

Layout: a directory holding one ``<name>.mat`` file per array plus
``manifest.txt``.  A matrix file is a dtype/dimension header line followed
by one row per line; floats print as %.17e so reloads are bit-exact.  The
manifest lists format version, config hash, seed, creation time, scalar
fields, and the SHA-256 of every matrix file; loading verifies the hashes.
"""

from __future__ import annotations

import hashlib
import os
from datetime import datetime, timezone

import numpy as np

from ..abstraction import MacroDecomposition, PolicyMap
from ..core_model import GenerativeModel
from ..successor import SuccessorMatrix

FORMAT_VERSION = 1


class ArtifactError(RuntimeError):
    """Missing, malformed, or corrupted artifact contents."""


def _write_matrix(path: str, arr: np.ndarray):
    a = np.asarray(arr)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ArtifactError(f"{path}: only 1-D or 2-D arrays are stored")
    kind = "int64" if np.issubdtype(a.dtype, np.integer) else "float64"
    lines = [f"{kind} {a.shape[0]} {a.shape[1]}"]
    if kind == "int64":
        for row in a.astype(np.int64):
            lines.append(" ".join(str(int(x)) for x in row))
    else:
        for row in a.astype(np.float64):
            lines.append(" ".join(f"{x:.17e}" for x in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _read_matrix(path: str) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ArtifactError(f"{path}: bad matrix header")
        kind, rows, cols = header[0], int(header[1]), int(header[2])
        dtype = np.int64 if kind == "int64" else np.float64
        data = np.loadtxt(fh, dtype=dtype, ndmin=2)
    if data.shape != (rows, cols):
        raise ArtifactError(
            f"{path}: header says {rows}x{cols}, file has {data.shape}"
        )
    return data


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def save_artifact(
    out_dir: str,
    *,
    config_hash: str,
    seed: int,
    model: GenerativeModel | None = None,
    sr: SuccessorMatrix | None = None,
    decomp: MacroDecomposition | None = None,
    qtable: np.ndarray | None = None,
    extra_scalars: dict | None = None,
) -> str:
    """Write all learned structures for one (agent, seed) run.

    Model and successor matrix are optional so a Q-learning run (which has
    neither) can still persist its table under the same manifest format.
    """
    os.makedirs(out_dir, exist_ok=True)
    arrays = {}
    if model is not None:
        arrays.update({"A": model.A, "C": model.C, "D": model.D})
        for a in range(model.n_actions):
            arrays[f"B_{a}"] = model.B[a]
    if sr is not None:
        arrays["M"] = sr.M
    if decomp is not None:
        arrays["labels"] = decomp.labels
        arrays["embedding"] = decomp.embedding
        arrays["B_macro"] = decomp.B_macro
        arrays["M_macro"] = decomp.M_macro
        arrays["G_macro"] = decomp.G_macro
        arrays["C_macro"] = decomp.C_macro
        arrays["ambiguity_macro"] = decomp.ambiguity_macro
        for (i, j), pol in sorted(decomp.macro_policies.items()):
            entries = sorted(pol.action_of.items())
            mat = np.array(
                [[s, a, pol.target_bottleneck] for s, a in entries],
                dtype=np.int64,
            ).reshape(-1, 3)
            arrays[f"policy_{i}_{j}"] = mat
    if qtable is not None:
        arrays["Q"] = qtable

    hashes = {}
    for name in sorted(arrays):
        path = os.path.join(out_dir, f"{name}.mat")
        _write_matrix(path, arrays[name])
        hashes[name] = _sha256(path)

    scalars = {
        "format_version": FORMAT_VERSION,
        "config_hash": config_hash,
        "seed": seed,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    if sr is not None:
        scalars["gamma"] = repr(sr.gamma)
        scalars["alpha"] = repr(sr.alpha)
    if model is not None:
        scalars["n_actions"] = model.n_actions
    scalars.update(extra_scalars or {})
    lines = [f"{k} = {scalars[k]}" for k in sorted(scalars)]
    lines.append("[arrays]")
    for name in sorted(hashes):
        lines.append(f"{name}.mat sha256={hashes[name]}")
    manifest = os.path.join(out_dir, "manifest.txt")
    with open(manifest, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return out_dir


def load_artifact(run_dir: str) -> dict:
    """Reload a saved run; returns model, sr, decomp (if present), qtable.

    Verifies every matrix file against its manifest hash before parsing.
    """
    manifest = os.path.join(run_dir, "manifest.txt")
    if not os.path.isfile(manifest):
        raise ArtifactError(f"no manifest in {run_dir}")
    scalars = {}
    hashes = {}
    in_arrays = False
    with open(manifest, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line == "[arrays]":
                in_arrays = True
                continue
            if in_arrays:
                fname, _, hpart = line.partition(" sha256=")
                hashes[fname] = hpart.strip()
            else:
                k, _, v = line.partition(" = ")
                scalars[k.strip()] = v.strip()

    arrays = {}
    for fname, expect in hashes.items():
        path = os.path.join(run_dir, fname)
        if not os.path.isfile(path):
            raise ArtifactError(f"{fname} listed in manifest but missing")
        got = _sha256(path)
        if got != expect:
            raise ArtifactError(f"{fname}: hash mismatch, artifact corrupted")
        arrays[fname[: -len(".mat")]] = _read_matrix(path)

    model = None
    if "A" in arrays:
        n_actions = int(scalars["n_actions"])
        B = np.stack([arrays[f"B_{a}"] for a in range(n_actions)])
        model = GenerativeModel(
            A=arrays["A"], B=B, C=arrays["C"].ravel(), D=arrays["D"].ravel()
        )
    sr = None
    if "M" in arrays:
        sr = SuccessorMatrix(
            M=arrays["M"],
            gamma=float(scalars["gamma"]),
            alpha=float(scalars["alpha"]),
        )

    decomp = None
    if "labels" in arrays:
        policies = {}
        for name in arrays:
            if name.startswith("policy_"):
                _, i, j = name.split("_")
                mat = arrays[name]
                action_of = {int(s): int(a) for s, a, _ in mat}
                bottleneck = int(mat[0, 2]) if len(mat) else -1
                policies[(int(i), int(j))] = PolicyMap(
                    action_of=action_of, target_bottleneck=bottleneck
                )
        labels = arrays["labels"].ravel()
        decomp = MacroDecomposition(
            k=int(labels.max()) + 1,
            labels=labels,
            embedding=arrays["embedding"],
            bottlenecks={
                (i, j): p.target_bottleneck for (i, j), p in policies.items()
            },
            macro_policies=policies,
            B_macro=arrays["B_macro"],
            M_macro=arrays["M_macro"],
            G_macro=arrays["G_macro"].ravel(),
            C_macro=arrays["C_macro"].ravel(),
            ambiguity_macro=arrays["ambiguity_macro"].ravel(),
            gamma=float(scalars.get("gamma", "0.95")),
        )

    return {
        "scalars": scalars,
        "model": model,
        "sr": sr,
        "decomp": decomp,
        "qtable": arrays.get("Q"),
    }
