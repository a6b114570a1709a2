"""Deterministic graph and metric generators for benchmarks and tests.

Every generator is a pure function of its spec (including the seed); no
ambient entropy. Random graphs are retried until connected and repaired
with a random spanning path as a last resort, so downstream code never
sees a disconnected input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import MetricError
from .graphs import WeightedGraph
from .metrics import MetricSpace

__all__ = ["GeneratorSpec", "generate"]

GNP_ATTEMPTS = 50


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str  # cycle | path | grid | gnp | random_metric
    n: int | None = None
    seed: int = 0
    p: float = 0.3
    weight_range: tuple[float, float] = (1.0, 2.0)
    width: int | None = None
    height: int | None = None


def _cycle(n: int) -> WeightedGraph:
    if n < 3:
        raise MetricError(f"a cycle needs n >= 3 vertices, got {n}")
    edges = [(i, i + 1, 1.0) for i in range(n - 1)] + [(n - 1, 0, 1.0)]
    return WeightedGraph(n, tuple(edges))


def _path(n: int) -> WeightedGraph:
    if n < 1:
        raise MetricError(f"a path needs n >= 1 vertices, got {n}")
    return WeightedGraph(n, tuple((i, i + 1, 1.0) for i in range(n - 1)))


def _grid(width: int, height: int) -> WeightedGraph:
    if width < 1 or height < 1:
        raise MetricError(f"grid needs positive width and height, got {width}x{height}")
    edges = []
    for r in range(height):
        for c in range(width):
            v = r * width + c
            if c + 1 < width:
                edges.append((v, v + 1, 1.0))
            if r + 1 < height:
                edges.append((v, v + width, 1.0))
    return WeightedGraph(width * height, tuple(edges))


def _gnp(n: int, p: float, weight_range: tuple[float, float], seed: int) -> WeightedGraph:
    if n < 1:
        raise MetricError(f"gnp needs n >= 1, got {n}")
    if not 0.0 < p <= 1.0:
        raise MetricError(f"gnp needs p in (0, 1], got {p}")
    w_lo, w_hi = weight_range
    if not (0.0 < w_lo <= w_hi and np.isfinite(w_hi)):
        raise MetricError(f"weight range must satisfy 0 < lo <= hi, got {weight_range}")
    iu, ju = np.triu_indices(n, k=1)
    last_edges: tuple | None = None
    for attempt in range(GNP_ATTEMPTS):
        rng = np.random.default_rng((seed, attempt))
        keep = rng.random(iu.size) < p
        weights = w_lo + rng.random(iu.size) * (w_hi - w_lo)
        edges = tuple(
            (int(u), int(v), float(w))
            for u, v, w, k in zip(iu, ju, weights, keep) if k
        )
        g = WeightedGraph(n, edges)
        ncomp, _ = connected_components(g.csr(), directed=False)
        if ncomp == 1:
            return g
        last_edges = edges
    # Still disconnected: thread a random spanning path through all vertices.
    rng = np.random.default_rng((seed, GNP_ATTEMPTS))
    perm = rng.permutation(n)
    have = {(min(u, v), max(u, v)) for u, v, _ in last_edges}
    extra = []
    for a, b in zip(perm[:-1], perm[1:]):
        key = (min(int(a), int(b)), max(int(a), int(b)))
        if key not in have:
            extra.append((key[0], key[1], float(w_lo + rng.random() * (w_hi - w_lo))))
            have.add(key)
    return WeightedGraph(n, tuple(last_edges) + tuple(extra))


def _random_metric(n: int, seed: int) -> MetricSpace:
    if n < 1:
        raise MetricError(f"random_metric needs n >= 1, got {n}")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 2))
    diff = pts[:, None, :] - pts[None, :, :]
    d = np.sqrt((diff ** 2).sum(axis=2))
    d = 0.5 * (d + d.T)  # exact symmetry regardless of summation order
    np.fill_diagonal(d, 0.0)
    return MetricSpace(d)


def generate(spec: GeneratorSpec):
    """WeightedGraph (cycle/path/grid/gnp) or MetricSpace (random_metric)."""
    kind = spec.kind.replace("-", "_").strip().lower()
    if kind == "grid":
        if spec.width is None or spec.height is None:
            raise MetricError("grid generator needs width and height")
        return _grid(spec.width, spec.height)
    if spec.n is None:
        raise MetricError(f"generator {spec.kind!r} needs n")
    if kind == "cycle":
        return _cycle(spec.n)
    if kind == "path":
        return _path(spec.n)
    if kind == "gnp":
        return _gnp(spec.n, spec.p, spec.weight_range, spec.seed)
    if kind == "random_metric":
        return _random_metric(spec.n, spec.seed)
    raise MetricError(f"unknown generator kind {spec.kind!r}")
