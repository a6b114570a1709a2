"""Shared builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths:
shortest paths come from a plain Floyd-Warshall sweep, ball counts from
linear scans, so library results are checked against a second opinion.
"""

import numpy as np
import pytest
from hypothesis import strategies as st

from treebed import MetricSpace, WeightedGraph


def floyd_warshall(n, edges):
    """All-pairs shortest paths by min-plus relaxation; inf when unreachable."""
    d = np.full((n, n), np.inf)
    np.fill_diagonal(d, 0.0)
    for u, v, w in edges:
        d[u, v] = min(d[u, v], w)
        d[v, u] = min(d[v, u], w)
    for k in range(n):
        d = np.minimum(d, d[:, k : k + 1] + d[k : k + 1, :])
    return d


def path_graph(n, w=1.0):
    return WeightedGraph(n, [(i, i + 1, w) for i in range(n - 1)])


def cycle_graph(n, w=1.0):
    return WeightedGraph(n, [(i, (i + 1) % n, w) for i in range(n)])


def grid_graph(width, height):
    """Unit grid, row-major ids; edges right then down from each cell."""
    edges = []
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                edges.append((v, v + 1, 1.0))
            if r + 1 < height:
                edges.append((v, v + width, 1.0))
    return WeightedGraph(width * height, edges)


def path_metric(n):
    idx = np.arange(n, dtype=np.float64)
    return MetricSpace(np.abs(idx[:, None] - idx[None, :]))


def euclidean_metric(n, seed, dim=2):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    d = np.maximum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return MetricSpace(d)


def random_connected_graph(n, seed, extra=2.0):
    """Random spanning path through a permutation plus ~extra*n chords."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    edges = {}
    for a, b in zip(perm[:-1], perm[1:]):
        key = (min(int(a), int(b)), max(int(a), int(b)))
        edges[key] = float(1.0 + rng.random())
    want = int(extra * n)
    for _ in range(want * 4):
        if len(edges) >= n - 1 + want:
            break
        a, b = rng.integers(n), rng.integers(n)
        if a == b:
            continue
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key not in edges:
            edges[key] = float(1.0 + rng.random())
    return WeightedGraph(n, [(u, v, w) for (u, v), w in sorted(edges.items())])


@pytest.fixture
def p4_metric():
    return path_metric(4)


@pytest.fixture
def c4_graph():
    return cycle_graph(4)


# Hypothesis strategies


@st.composite
def euclidean_spaces(draw, max_points=10, max_dim=3):
    n = draw(st.integers(min_value=2, max_value=max_points))
    dim = draw(st.integers(min_value=1, max_value=max_dim))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    rng = np.random.default_rng(seed)
    # integer grid coordinates keep points distinct after dedup
    pts = rng.integers(0, 50, size=(n, dim)).astype(np.float64)
    pts = np.unique(pts, axis=0)
    if pts.shape[0] < 2:
        pts = np.vstack([pts, pts + 1.0])
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff**2).sum(axis=2))
    d = np.maximum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return MetricSpace(d)


@st.composite
def connected_graphs(draw, max_points=10):
    n = draw(st.integers(min_value=2, max_value=max_points))
    seed = draw(st.integers(min_value=0, max_value=2**31 - 1))
    extra = draw(st.floats(min_value=0.0, max_value=3.0))
    return random_connected_graph(n, seed, extra)
