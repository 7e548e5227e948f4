"""Reading and writing edge lists, labels and fitted models.

Floats are written with 17 significant digits so every file round-trips
exactly.  All text files are UTF-8 with LF line endings.
"""
from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .errors import (DuplicateEdge, IndexOutOfRange, MalformedEdgeList, MissingTruth,
                     NetworkError, SelfLoop)
from .locdens import DensityEstimate
from .network import WeightedNetwork, from_arrays
from .varem.params import FitResult, pair_keys


def fmt(x) -> str:
    return format(float(x), ".17g")


def _open_w(path):
    return open(path, "w", encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# edge lists

def write_edges(path, net: WeightedNetwork):
    with _open_w(path) as fh:
        fh.write("i,j,w\n")
        for i, j, w in zip(net.src, net.dst, net.weight):
            fh.write(f"{int(i)},{int(j)},{fmt(w)}\n")


def read_edges(path, n: int | None = None) -> WeightedNetwork:
    """Parse an ``i,j,w`` edge list with a mandatory header.

    ``n`` defaults to one more than the largest node index.  Malformed rows,
    self-loops and duplicate pairs raise :class:`MalformedEdgeList` carrying
    the 1-based line number.
    """
    src, dst, wts = [], [], []
    seen = {}
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline()
        if header.strip().replace(" ", "") != "i,j,w":
            raise MalformedEdgeList(path, 1, f"expected header 'i,j,w', got {header.strip()!r}")
        for lineno, line in enumerate(fh, start=2):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if len(parts) != 3:
                raise MalformedEdgeList(path, lineno, f"expected 3 fields, got {len(parts)}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2])
            except ValueError:
                raise MalformedEdgeList(path, lineno, f"cannot parse row {text!r}") from None
            if not math.isfinite(w):
                raise MalformedEdgeList(path, lineno, f"non-finite weight in {text!r}")
            if i < 0 or j < 0 or (n is not None and max(i, j) >= n):
                raise MalformedEdgeList(path, lineno, f"node index out of range in {text!r}")
            if i == j:
                raise MalformedEdgeList(path, lineno, f"self-loop {text!r}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise MalformedEdgeList(path, lineno,
                                        f"duplicate pair {key} (first seen on line {seen[key]})")
            seen[key] = lineno
            src.append(i)
            dst.append(j)
            wts.append(w)
    if n is None:
        n = max(max(src, default=0), max(dst, default=0)) + 1
    try:
        return from_arrays(max(int(n), 2), src, dst, wts)
    except (SelfLoop, DuplicateEdge, IndexOutOfRange, NetworkError) as exc:
        raise MalformedEdgeList(path, 0, str(exc)) from exc


# ---------------------------------------------------------------------------
# labels

def write_labels(path, labels):
    with _open_w(path) as fh:
        fh.write("node,cluster\n")
        for i, c in enumerate(np.asarray(labels)):
            fh.write(f"{i},{int(c)}\n")


def read_labels(path) -> np.ndarray:
    if not os.path.exists(path):
        raise MissingTruth(f"label file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["node", "cluster"]:
        raise MalformedEdgeList(path, 1, "expected header 'node,cluster'")
    body = [r for r in rows[1:] if r]
    out = np.empty(len(body), dtype=np.int64)
    for lineno, r in enumerate(body, start=2):
        try:
            node, cl = int(r[0]), int(r[1])
        except (ValueError, IndexError):
            raise MalformedEdgeList(path, lineno, f"cannot parse row {r!r}") from None
        if not 0 <= node < len(body):
            raise MalformedEdgeList(path, lineno, f"node {node} out of range")
        out[node] = cl
    return out


# ---------------------------------------------------------------------------
# JSON documents

def _clean(x):
    """Make numpy containers JSON-ready; non-finite floats become null."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def write_json(path, doc):
    with _open_w(path) as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    if not os.path.exists(path):
        raise MissingTruth(f"file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def truth_document(cfg, labels) -> dict:
    wm = cfg.weight_model
    return {
        "n": cfg.n, "K": cfg.K, "pi": cfg.pi, "theta": cfg.theta, "seed": cfg.seed,
        "weight_kind": wm.kind,
        "block_params": None if wm.block_params is None else wm.block_params,
        "labels": np.asarray(labels),
    }


def fit_document(result: FitResult, seed=None) -> dict:
    p = result.params
    return {
        "theta": p.theta,
        "pi": p.pi,
        "labels": result.hard_labels,
        "gamma": result.gamma,
        "elbo_trace": list(result.elbo_trace),
        "icl": result.icl,
        "converged": bool(result.converged),
        "config": result.config.to_dict() if result.config is not None else None,
        "seed": seed if seed is not None else (result.config.seed if result.config else None),
        "weight_mode": p.weight_mode,
        "block_params": p.block_params,
        "restart": result.restart,
    }


# ---------------------------------------------------------------------------
# densities

def write_density(path, est: DensityEstimate):
    with _open_w(path) as fh:
        fh.write("w,log_f,f\n")
        for w, lf in zip(est.grid, est.log_density):
            fh.write(f"{fmt(w)},{fmt(lf)},{fmt(math.exp(lf))}\n")


def read_density(path, bandwidth=float("nan"), degree=2) -> DensityEstimate:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    grid, log_f = data[:, 0], data[:, 1]
    return DensityEstimate(grid, log_f, bandwidth, degree, (grid[0], grid[-1]))


def density_filename(k, l) -> str:
    return f"density_{k}_{l}.csv"


def write_densities(outdir, result: FitResult):
    paths = []
    p = result.params
    if p.densities is None:
        return paths
    for k, l in pair_keys(p.K):
        path = os.path.join(outdir, density_filename(k, l))
        write_density(path, p.density(k, l))
        paths.append(path)
    return paths
