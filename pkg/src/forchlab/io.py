"""Deterministic artifact files: JSON, trajectory snapshots and their index."""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .grid import Grid
from .model import DomainSpec
from .solver import Trajectory

INDEX = "index.json"


def clean(obj):
    """Recursively turn numpy scalars into Python ones and non-finite floats into strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj):
    return json.dumps(clean(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def save_trajectory(traj, out_dir, fmt="npy", extra=None):
    """Write snapshots to ``out_dir/snapshots`` and an index to ``out_dir/index.json``.

    ``csv`` snapshots hold plot-ready ``x,y,z,u`` rows; ``npy`` holds the raw cell array.
    """
    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    g = traj.grid
    files = []
    for i, u in enumerate(traj.snapshots):
        name = f"snap_{i:04d}.{fmt}"
        path = os.path.join(snap_dir, name)
        if fmt == "npy":
            np.save(path, np.ascontiguousarray(u, dtype=float))
        elif fmt == "csv":
            rows = np.column_stack([g.centers.reshape(-1, 3), np.asarray(u).reshape(-1)])
            np.savetxt(path, rows, delimiter=",", header="x,y,z,u", comments="", fmt="%.17g")
        else:
            raise ValueError(f"unknown snapshot format {fmt!r}")
        files.append(os.path.join("snapshots", name))
    index = {
        "format": fmt,
        "grid": {"shape": list(g.shape), "lower": list(g.domain.lower), "extent": list(g.domain.extent)},
        "times": [float(t) for t in traj.times],
        "files": files,
        "meta": traj.meta,
    }
    if extra:
        index.update(extra)
    write_json(os.path.join(out_dir, INDEX), index)
    return index


def load_trajectory(out_dir):
    """Read a trajectory written by :func:`save_trajectory`; ``FileNotFoundError`` if absent."""
    path = os.path.join(out_dir, INDEX)
    if not os.path.exists(path):
        raise FileNotFoundError(f"no trajectory index at {path}")
    idx = read_json(path)
    gi = idx["grid"]
    grid = Grid(tuple(gi["shape"]), DomainSpec(tuple(gi["lower"]), tuple(gi["extent"])))
    snaps = []
    for f in idx["files"]:
        p = os.path.join(out_dir, f)
        if not os.path.exists(p):
            raise FileNotFoundError(f"missing snapshot {p}")
        if idx["format"] == "npy":
            snaps.append(np.load(p))
        else:
            rows = np.loadtxt(p, delimiter=",", skiprows=1)
            snaps.append(rows[:, 3].reshape(grid.shape))
    return Trajectory(grid, idx["times"], snaps, idx.get("meta", {})), idx
