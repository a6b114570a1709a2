"""Benchmark input generators: shapes, determinism, connectivity."""

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from treebed.errors import MetricError
from treebed.generators import GeneratorSpec, generate
from treebed.graphs import WeightedGraph
from treebed.metrics import MetricSpace


def test_cycle_shape_and_edge_order():
    g = generate(GeneratorSpec("cycle", n=5))
    assert isinstance(g, WeightedGraph)
    assert g.n == 5
    assert g.edges == (
        (0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 4, 1.0), (4, 0, 1.0))


def test_cycle_too_small():
    with pytest.raises(MetricError, match="n >= 3"):
        generate(GeneratorSpec("cycle", n=2))


def test_path_shape():
    g = generate(GeneratorSpec("path", n=4))
    assert g.edges == ((0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0))


def test_path_single_vertex():
    g = generate(GeneratorSpec("path", n=1))
    assert g.n == 1
    assert g.edges == ()


def test_grid_shape_and_edge_order():
    # Row-major vertices; per vertex the rightward edge precedes the
    # downward one.
    g = generate(GeneratorSpec("grid", width=3, height=2))
    assert g.n == 6
    assert g.edges == (
        (0, 1, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 4, 1.0), (2, 5, 1.0),
        (3, 4, 1.0), (4, 5, 1.0))


def test_grid_needs_dimensions():
    with pytest.raises(MetricError, match="width and height"):
        generate(GeneratorSpec("grid", n=6))


def test_grid_rejects_empty_axis():
    with pytest.raises(MetricError, match="positive"):
        generate(GeneratorSpec("grid", width=0, height=3))


def test_gnp_deterministic_per_seed():
    a = generate(GeneratorSpec("gnp", n=20, seed=7, p=0.2))
    b = generate(GeneratorSpec("gnp", n=20, seed=7, p=0.2))
    c = generate(GeneratorSpec("gnp", n=20, seed=8, p=0.2))
    assert a.edges == b.edges
    assert a.edges != c.edges


def test_gnp_always_connected_even_at_tiny_p():
    # p = 0.001 at n = 30 almost surely comes out disconnected on every
    # attempt, forcing the spanning-path repair.
    g = generate(GeneratorSpec("gnp", n=30, seed=3, p=0.001))
    ncomp, _ = connected_components(g.csr(), directed=False)
    assert ncomp == 1


def test_gnp_weights_inside_range():
    g = generate(GeneratorSpec("gnp", n=15, seed=1, p=0.5,
                               weight_range=(2.0, 3.0)))
    ws = [w for _, _, w in g.edges]
    assert ws and all(2.0 <= w <= 3.0 for w in ws)


def test_gnp_validates_parameters():
    with pytest.raises(MetricError, match="p in"):
        generate(GeneratorSpec("gnp", n=5, p=0.0))
    with pytest.raises(MetricError, match="weight range"):
        generate(GeneratorSpec("gnp", n=5, weight_range=(0.0, 1.0)))
    with pytest.raises(MetricError, match="weight range"):
        generate(GeneratorSpec("gnp", n=5, weight_range=(3.0, 1.0)))


def test_random_metric_is_exactly_symmetric_euclidean():
    m = generate(GeneratorSpec("random_metric", n=25, seed=9))
    assert isinstance(m, MetricSpace)
    assert np.array_equal(m.d, m.d.T)
    m.check_triangle()
    again = generate(GeneratorSpec("random_metric", n=25, seed=9))
    assert np.array_equal(m.d, again.d)


def test_hyphenated_kind_accepted():
    m = generate(GeneratorSpec("random-metric", n=4, seed=0))
    assert isinstance(m, MetricSpace)


def test_missing_n_rejected():
    with pytest.raises(MetricError, match="needs n"):
        generate(GeneratorSpec("cycle"))


def test_unknown_kind_rejected():
    with pytest.raises(MetricError, match="unknown generator"):
        generate(GeneratorSpec("torus", n=5))
