"""Undirected weighted network container and degree utilities.

A network holds ``n`` nodes and a set of weighted edges ``(i, j, w)`` stored
canonically with ``i < j``.  An edge with weight exactly 0 is still a present
edge; absence is encoded only by the pair being missing.
"""
from __future__ import annotations

from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import DuplicateEdge, IndexOutOfRange, SelfLoop


class WeightedNetwork:
    """Immutable undirected network with one real weight per edge.

    Use :func:`build_network` to construct one from raw triples.  Edges are
    sorted lexicographically by ``(i, j)``.
    """

    def __init__(self, n: int, src: np.ndarray, dst: np.ndarray, weight: np.ndarray):
        self.n = int(n)
        self.src = src
        self.dst = dst
        self.weight = weight
        for a in (src, dst, weight):
            a.setflags(write=False)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    @property
    def n_dyads(self) -> int:
        return self.n * (self.n - 1) // 2

    def triples(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.src, self.dst, self.weight)]

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.bincount(self.src, minlength=self.n) + np.bincount(self.dst, minlength=self.n)
        d.setflags(write=False)
        return d

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 adjacency as a CSR matrix."""
        rows = np.concatenate([self.src, self.dst])
        cols = np.concatenate([self.dst, self.src])
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    @cached_property
    def incidence(self) -> tuple[sp.csr_matrix, sp.csr_matrix]:
        """``(n, m)`` 0/1 matrices mapping edges to their first and second endpoint."""
        m = self.n_edges
        cols = np.arange(m)
        ones = np.ones(m)
        first = sp.csr_matrix((ones, (self.src, cols)), shape=(self.n, m))
        second = sp.csr_matrix((ones, (self.dst, cols)), shape=(self.n, m))
        return first, second

    @cached_property
    def neighbors(self) -> tuple[np.ndarray, ...]:
        adj = self.adjacency
        return tuple(adj.indices[adj.indptr[i]:adj.indptr[i + 1]].copy() for i in range(self.n))

    def mean_incident_weight(self) -> np.ndarray:
        """Average weight over each node's incident edges (0 for isolated nodes)."""
        tot = np.bincount(self.src, weights=self.weight, minlength=self.n)
        tot += np.bincount(self.dst, weights=self.weight, minlength=self.n)
        deg = self.degrees
        out = np.zeros(self.n)
        np.divide(tot, deg, out=out, where=deg > 0)
        return out

    def __eq__(self, other):
        if not isinstance(other, WeightedNetwork):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.weight, other.weight))

    __hash__ = None

    def __repr__(self):
        return f"WeightedNetwork(n={self.n}, n_edges={self.n_edges})"


def build_network(n: int, edge_triples: Iterable[tuple[int, int, float]]) -> WeightedNetwork:
    """Validate and canonicalize an edge list.

    Parameters
    ----------
    n : int
        Number of nodes, at least 2.
    edge_triples : iterable of (i, j, w)
        Unordered pairs with a real weight.  ``(1, 0, w)`` is stored as
        ``(0, 1, w)``.

    Raises
    ------
    SelfLoop, DuplicateEdge, IndexOutOfRange
        The message names the offending triple.
    """
    n = int(n)
    if n < 2:
        raise ValueError(f"a network needs at least 2 nodes, got n={n}")
    seen = set()
    src, dst, wts = [], [], []
    for t in edge_triples:
        i, j, w = t
        if int(i) != i or int(j) != j:
            raise IndexOutOfRange(f"non-integer node index in {t!r}")
        i, j = int(i), int(j)
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRange(f"node index out of range [0, {n}) in {t!r}")
        if i == j:
            raise SelfLoop(f"self-loop {t!r}")
        a, b = (i, j) if i < j else (j, i)
        if (a, b) in seen:
            raise DuplicateEdge(f"duplicate pair ({a}, {b}) in {t!r}")
        seen.add((a, b))
        src.append(a)
        dst.append(b)
        wts.append(float(w))
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    wts = np.asarray(wts, dtype=float)
    order = np.lexsort((dst, src))
    return WeightedNetwork(n, src[order], dst[order], wts[order])


def from_arrays(n: int, src, dst, weight) -> WeightedNetwork:
    """Vectorized counterpart of :func:`build_network` for parallel arrays."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    weight = np.asarray(weight, dtype=float)
    if not (src.shape == dst.shape == weight.shape):
        raise ValueError("src, dst and weight must have equal length")
    if src.size:
        if np.any(src == dst):
            k = int(np.flatnonzero(src == dst)[0])
            raise SelfLoop(f"self-loop {(int(src[k]), int(dst[k]), float(weight[k]))!r}")
        if src.min() < 0 or max(src.max(), dst.max()) >= n or dst.min() < 0:
            raise IndexOutOfRange(f"node index out of range [0, {n})")
    lo, hi = np.minimum(src, dst), np.maximum(src, dst)
    order = np.lexsort((hi, lo))
    lo, hi, weight = lo[order], hi[order], weight[order]
    if lo.size > 1:
        dup = (np.diff(lo) == 0) & (np.diff(hi) == 0)
        if dup.any():
            k = int(np.flatnonzero(dup)[0])
            raise DuplicateEdge(f"duplicate pair ({int(lo[k])}, {int(hi[k])})")
    return WeightedNetwork(n, lo, hi, weight)


def degree(net: WeightedNetwork, i: int) -> int:
    """Number of edges incident to node ``i``."""
    if not 0 <= i < net.n:
        raise IndexOutOfRange(f"node {i} not in [0, {net.n})")
    return int(net.degrees[i])


def check_labels(z, K: int | None = None) -> np.ndarray:
    """Return ``z`` as an int array, checking entries lie in ``[0, K)``."""
    z = np.asarray(z)
    if z.ndim != 1:
        raise ValueError("labels must be a 1-d vector")
    if z.size and not np.issubdtype(z.dtype, np.integer):
        if not np.all(z == np.round(z)):
            raise ValueError("labels must be integers")
    z = z.astype(np.int64)
    if z.size and z.min() < 0:
        raise ValueError("labels must be non-negative")
    if K is not None and z.size and z.max() >= K:
        raise ValueError(f"label {int(z.max())} out of range for K={K}")
    return z


def one_hot(z, K: int) -> np.ndarray:
    z = check_labels(z, K)
    out = np.zeros((z.size, K))
    out[np.arange(z.size), z] = 1.0
    return out
