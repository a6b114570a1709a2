"""Weighted graphs and exact shortest-path metrics.

Graphs are undirected with strictly positive finite weights and vertex ids
0..n-1. Shortest paths run through scipy's Dijkstra on a CSR adjacency
matrix, one source at a time over all vertices, which is exact for
nonnegative weights and fast enough for the dense desk scale this package
targets (n up to a few thousand).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import DisconnectedGraphError, MetricError

__all__ = [
    "WeightedGraph",
    "shortest_path_metric",
    "subgraph_all_pairs",
    "subgraph_single_source",
]


@dataclass(frozen=True)
class WeightedGraph:
    """Immutable undirected graph.

    ``edges`` is a tuple of (u, v, w) triples; the position of a triple in
    the tuple is its edge id, which tie-breaking rules elsewhere rely on.
    """

    n: int
    edges: tuple[tuple[int, int, float], ...]
    _adjacency: tuple[tuple[tuple[int, float, int], ...], ...] = field(
        init=False, repr=False, compare=False, default=()
    )

    def __post_init__(self):
        if self.n < 1:
            raise MetricError(f"graph needs at least one vertex, got n={self.n}")
        object.__setattr__(
            self, "edges",
            tuple((int(u), int(v), float(w)) for u, v, w in self.edges))
        seen: set[tuple[int, int]] = set()
        adj: list[list[tuple[int, float, int]]] = [[] for _ in range(self.n)]
        for eid, (u, v, w) in enumerate(self.edges):
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise MetricError(f"edge {eid} endpoint out of range: ({u}, {v})")
            if u == v:
                raise MetricError(f"edge {eid} is a self-loop at vertex {u}")
            if not (math.isfinite(w) and w > 0):
                raise MetricError(f"edge {eid} weight must be positive and finite, got {w!r}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise MetricError(f"duplicate edge between {key[0]} and {key[1]} (edge {eid})")
            seen.add(key)
            adj[u].append((v, float(w), eid))
            adj[v].append((u, float(w), eid))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[tuple[int, float, int], ...]:
        """(other endpoint, weight, edge id) triples incident to u."""
        return self._adjacency[u]

    def csr(self) -> csr_matrix:
        if not self.edges:
            return csr_matrix((self.n, self.n))
        arr = np.asarray([(u, v) for u, v, _ in self.edges], dtype=np.int64)
        w = np.asarray([w for _, _, w in self.edges], dtype=np.float64)
        rows = np.concatenate([arr[:, 0], arr[:, 1]])
        cols = np.concatenate([arr[:, 1], arr[:, 0]])
        data = np.concatenate([w, w])
        return csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def edge_weight(self, eid: int) -> float:
        return self.edges[eid][2]


def shortest_path_metric(g: WeightedGraph):
    """All-pairs shortest-path distances of ``g`` as a MetricSpace.

    Raises DisconnectedGraphError naming an unreachable pair when the graph
    is not connected.
    """
    from .metrics import MetricSpace

    d = dijkstra(g.csr(), directed=False)
    bad = np.argwhere(~np.isfinite(d))
    if bad.size:
        u, v = int(bad[0, 0]), int(bad[0, 1])
        raise DisconnectedGraphError(u, v)
    # relaxation order differs per source, so the two directions of a pair
    # can disagree in the last ulp; the min of the two restores symmetry
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return MetricSpace(d)


def subgraph_all_pairs(g: WeightedGraph, vertices: np.ndarray) -> np.ndarray:
    """Shortest-path matrix of the subgraph induced by ``vertices``.

    Rows/columns follow the order of ``vertices``. Unreachable entries stay
    +inf (induced subgraphs may be disconnected even when g is not).
    """
    idx = np.asarray(vertices, dtype=np.int64)
    sub = g.csr()[idx][:, idx]
    d = dijkstra(sub, directed=False)
    d = np.minimum(d, d.T)  # keep exactly symmetric despite per-source rounding
    np.fill_diagonal(d, 0.0)
    return d


def subgraph_single_source(g: WeightedGraph, vertices: np.ndarray, source_pos: int) -> np.ndarray:
    """Distances from vertices[source_pos] inside the induced subgraph."""
    idx = np.asarray(vertices, dtype=np.int64)
    sub = g.csr()[idx][:, idx]
    d = dijkstra(sub, directed=False, indices=source_pos)
    d[source_pos] = 0.0
    return d
