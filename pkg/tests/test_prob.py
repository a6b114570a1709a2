"""Randomized spanning trees: densities, samplers, partitions, ensembles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from treebed import (
    ConeSampler,
    MetricError,
    MetricSpace,
    WeightedGraph,
    build_prob_spanning_tree,
    choose_gamma,
    cone_radius_cdf,
    cone_radius_pdf,
    local_density,
    make_density,
    prob_star_partition,
    sample_central_radius,
    sample_cone_radius,
    sample_tree_ensemble,
    shortest_path_metric,
    validate_density,
    verify_radius_invariants,
)
from treebed.prob import (
    DensityFunction,
    _path_seed,
    density_normalization,
    density_normalization_truncated,
)

from conftest import cycle_graph, path_graph, path_metric, random_connected_graph


# -- densities ---------------------------------------------------------------


def test_inverse_square_normalizes_exactly():
    d = make_density("inverse-square")
    assert d(2.0) == 4.0
    assert density_normalization(d) == pytest.approx(1.0, abs=1e-12)


def test_inverse_square_truncated_integral_approaches_one():
    d = make_density("inverse-square")
    # closed form of the truncated integral is 1 - 1/x_max
    assert density_normalization_truncated(d, 1e6) == pytest.approx(1.0 - 1e-6, rel=1e-9)
    assert density_normalization_truncated(d, 1e12) == pytest.approx(1.0, abs=1e-6)


def test_doubled_inverse_square_is_rejected():
    # f(x) = 2x^2 integrates to 1/2, violating the normalization invariant
    bad = DensityFunction(tag="2x^2", fn=lambda x: 2.0 * x * x)
    with pytest.raises(MetricError):
        validate_density(bad)


def test_iterated_log_t1_closed_form():
    # t=1, theta=1: f(x) = (x+e-1) * ln^2(x+e-1), so f(1) = e * 1
    d = make_density("iterated-log", t=1, theta=1.0)
    assert d(1.0) == pytest.approx(math.e, rel=1e-12)
    assert density_normalization(d) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("t,theta", [(1, 1.0), (2, 1.0), (3, 0.5), (1, 0.25)])
def test_iterated_log_family_normalizes(t, theta):
    d = make_density("iterated-log", t=t, theta=theta)
    validate_density(d)
    assert density_normalization(d) == pytest.approx(1.0, abs=1e-6)


def test_iterated_log_rejects_deep_towers():
    # tower(4) = e^e^e^e overflows double precision
    with pytest.raises(MetricError):
        make_density("iterated-log", t=4)


def test_iterated_log_rejects_nonpositive_theta():
    with pytest.raises(MetricError):
        make_density("iterated-log", t=1, theta=0.0)


def test_density_clamps_arguments_below_one():
    d = make_density("inverse-square")
    assert d(0.25) == d(1.0) == 1.0


def test_unknown_density_kind():
    with pytest.raises(MetricError):
        make_density("cauchy")


# -- cone radius sampler -------------------------------------------------------


def test_sampler_requires_chi_at_least_four():
    with pytest.raises(MetricError):
        ConeSampler(chi=2.0, alpha=0.5, lam_hat=1.0)


def test_sampler_endpoints():
    s = ConeSampler(chi=4.0, alpha=0.5, lam_hat=2.0)
    assert sample_cone_radius(s, 0.0) == pytest.approx(s.r_min, rel=1e-12)
    assert sample_cone_radius(s, 1.0) == pytest.approx(s.r_max, rel=1e-12)
    assert s.r_min == pytest.approx(0.5 * 2.0 / 16.0)
    assert s.r_max == pytest.approx(0.5 * 2.0 / 8.0)


def test_pdf_integrates_to_one():
    for chi in (4.0, 10.0, 100.0):
        s = ConeSampler(chi=chi, alpha=0.3, lam_hat=5.0)
        total, err = quad(lambda r: cone_radius_pdf(s, r), s.r_min, s.r_max)
        assert total == pytest.approx(1.0, abs=1e-10)


def test_cdf_matches_integrated_pdf():
    s = ConeSampler(chi=7.0, alpha=0.4, lam_hat=3.0)
    for frac in (0.1, 0.35, 0.8):
        r = s.r_min + frac * (s.r_max - s.r_min)
        total, _ = quad(lambda t: cone_radius_pdf(s, t), s.r_min, r)
        assert cone_radius_cdf(s, r) == pytest.approx(total, abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0),
       st.floats(min_value=4.0, max_value=500.0))
def test_sampled_radius_always_in_band(u, chi):
    s = ConeSampler(chi=chi, alpha=0.7, lam_hat=11.0)
    r = sample_cone_radius(s, u)
    assert s.r_min <= r <= s.r_max


def test_ks_statistic_small_at_quick_scale():
    # a cheap version of the sampler fidelity check; the acceptance suite
    # runs the full 1e5-draw version at chi in {4, 10, 100}
    s = ConeSampler(chi=4.0, alpha=0.5, lam_hat=1.0)
    rng = np.random.default_rng(0)
    draws = np.sort([sample_cone_radius(s, u) for u in rng.random(20000)])
    cdf = cone_radius_cdf(s, draws)
    n = draws.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    ks = max(np.max(ecdf_hi - cdf), np.max(cdf - ecdf_lo))
    assert ks < 0.015


# -- central ball helpers ------------------------------------------------------


def test_choose_gamma_empty_strips_tie_to_zero():
    m = path_metric(2)  # both strip annuli around 0 are empty
    assert choose_gamma(m, 0, 1.0) == 0.0


def test_choose_gamma_prefers_emptier_inner_strip():
    # eight points at distance 0.6 from the center land in the outer strip
    # (0.5625, 0.625] only, so gamma = 0 has the emptier strip
    d = np.zeros((9, 9))
    d[0, 1:] = d[1:, 0] = 0.6
    d[1:, 1:] = 1.0
    np.fill_diagonal(d, 0.0)
    assert choose_gamma(MetricSpace(d), 0, 1.0) == 0.0


def test_choose_gamma_moves_when_inner_strip_is_crowded():
    # points at distance 0.55 sit in (0.5, 0.5625]; the outer strip is empty
    d = np.zeros((6, 6))
    d[0, 1:] = d[1:, 0] = 0.55
    d[1:, 1:] = 1.0
    np.fill_diagonal(d, 0.0)
    assert choose_gamma(MetricSpace(d), 0, 1.0) == 1.0 / 16.0


def test_choose_gamma_unit_cycle_eight():
    m = shortest_path_metric(cycle_graph(8))
    # strips cover radii (2, 2.25] and (2.25, 2.5]; all distances integral
    assert choose_gamma(m, 0, 4.0) == 0.0


def test_central_radius_endpoints():
    assert sample_central_radius(0.0, 0.0, 2.0) == 1.0
    assert sample_central_radius(1.0 / 16.0, 1.0 / 8.0, 1.0) == pytest.approx(0.625)
    assert sample_central_radius(0.0, 1.0 / 16.0, 1.0) == pytest.approx(0.5 + 1.0 / 64.0)


@settings(max_examples=80, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.125),
       st.sampled_from([0.0, 1.0 / 16.0]))
def test_central_radius_lands_in_analysis_strip(beta_rand, gamma):
    r = sample_central_radius(gamma, beta_rand, 1.0)
    if gamma == 0.0:
        assert 0.5 <= r <= 0.5 + 1.0 / 32.0 + 1e-15
    else:
        assert 0.5 + 3.0 / 32.0 <= r <= 0.625 + 1e-15


def test_central_radius_rejects_bad_gamma():
    with pytest.raises(MetricError):
        sample_central_radius(0.2, 0.0, 1.0)


# -- local density -------------------------------------------------------------


def test_local_density_singleton():
    m = path_metric(4)
    assert local_density(m, [2], 2, 0.5) == 1.0


def test_local_density_uniform_below_min_distance():
    d = np.ones((5, 5))
    np.fill_diagonal(d, 0.0)
    m = MetricSpace(d)
    assert local_density(m, [0, 1, 2, 3, 4], 3, 0.5) == 5.0


def test_local_density_path_tail():
    # Y0 = {1,2,3} around v=2 with radius 1: the closed ball covers all
    # three points, so the ratio is 3/3
    m = path_metric(4)
    assert local_density(m, [1, 2, 3], 2, 1.0) == 1.0


def test_local_density_requires_membership():
    m = path_metric(4)
    with pytest.raises(MetricError):
        local_density(m, [1, 2, 3], 0, 1.0)


# -- probabilistic star partition ----------------------------------------------


def test_prob_partition_singleton():
    g = path_graph(3)
    rng = np.random.default_rng(0)
    sp = prob_star_partition(g, [1], 1, 1.0, rng,
                             density=make_density("inverse-square"))
    assert len(sp.parts) == 1
    assert sp.parts[0].kind == "central"


def test_prob_partition_two_vertices_hand_trace():
    # alpha = 1/f(max(1, ln 2)) = 1 for inverse-square; the central radius
    # is at most (5/8) w < w, so the ball holds only x0 and the other
    # endpoint becomes a single cone with chi = max(4, 1/1) = 4
    g = WeightedGraph(2, [(0, 1, 2.0)])
    rng = np.random.default_rng(123)
    sp = prob_star_partition(g, [0, 1], 0, 2.0, rng,
                             density=make_density("inverse-square"))
    assert [p.kind for p in sp.parts] == ["central", "cone"]
    assert list(sp.parts[0].points) == [0]
    assert list(sp.parts[1].points) == [1]
    assert sp.parts[1].chi == 4.0
    assert sp.rand["alpha"] == 1.0


@pytest.mark.parametrize("seed", range(6))
def test_prob_partition_radii_within_bands(seed):
    g = cycle_graph(9)
    rng = np.random.default_rng(seed)
    sp = prob_star_partition(g, np.arange(9), 0, 4.0, rng,
                             density=make_density("inverse-square"))
    alpha = sp.rand["alpha"]
    lam_hat = sp.params.lam_hat
    for cone in sp.rand["cones"]:
        assert alpha * lam_hat / 16.0 <= cone["r"] <= alpha * lam_hat / 8.0
    for p in sp.parts:
        assert p.rad <= 0.625 * lam_hat * (1.0 + 1e-9)


def test_prob_partition_bitwise_reproducible():
    g = cycle_graph(8)
    a = prob_star_partition(g, np.arange(8), 0, 4.0, np.random.default_rng(42),
                            density=make_density("inverse-square"))
    b = prob_star_partition(g, np.arange(8), 0, 4.0, np.random.default_rng(42),
                            density=make_density("inverse-square"))
    assert a.rand == b.rand
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a.parts, b.parts))


# -- full tree construction -----------------------------------------------------


def test_path_seed_distinguishes_paths():
    seeds = {_path_seed(7, p) for p in [(), (0,), (1,), (0, 0), (0, 1), ("root",)]}
    assert len(seeds) == 6


def test_tree_input_same_edges_for_any_seed():
    g = WeightedGraph(5, [(0, 1, 1.0), (1, 2, 2.0), (1, 3, 0.5), (3, 4, 1.5)])
    for seed in range(8):
        tree, _ = build_prob_spanning_tree(g, seed)
        assert tree.edges == g.edges


def test_seeded_build_is_reproducible():
    g = random_connected_graph(20, seed=3)
    t1, tr1 = build_prob_spanning_tree(g, 99)
    t2, tr2 = build_prob_spanning_tree(g, 99)
    assert t1.edges == t2.edges
    assert len(tr1.nodes) == len(tr2.nodes)


def test_cycle_drop_frequencies_are_balanced():
    # every spanning tree of C4 is the cycle minus one edge; with the seed
    # driving both the root draw and the walk tie-breaks each edge should
    # be dropped about a quarter of the time
    g = cycle_graph(4)
    counts = {(u, v): 0 for u, v, _ in g.edges}
    n_seeds = 4000
    for seed in range(n_seeds):
        tree, _ = build_prob_spanning_tree(g, seed)
        kept = {(u, v) for u, v, _ in tree.edges}
        for key in counts:
            if key not in kept:
                counts[key] += 1
    for key, c in counts.items():
        assert 0.15 <= c / n_seeds <= 0.35, (key, c / n_seeds)


@pytest.mark.parametrize("seed", range(5))
def test_sampled_trees_are_valid_and_pass_radius_checks(seed):
    g = random_connected_graph(18, seed=seed + 40, extra=1.5)
    tree, trace = build_prob_spanning_tree(g, seed)
    assert len(tree.edges) == g.n - 1
    tree.validate_against(g)
    assert verify_radius_invariants(trace, tree).passed


def test_iterated_log_density_builds_trees_too():
    g = cycle_graph(12)
    d = make_density("iterated-log", t=1, theta=1.0)
    tree, trace = build_prob_spanning_tree(g, 5, density=d)
    assert len(tree.edges) == 11
    assert trace.density == d.tag


# -- ensembles -------------------------------------------------------------------


def test_ensemble_single_seed_equals_that_tree():
    g = cycle_graph(6)
    ens = sample_tree_ensemble(g, [17])
    tree, _ = build_prob_spanning_tree(g, 17)
    dg = shortest_path_metric(g).d
    dt = tree.all_pairs()
    off = dg > 0
    expected = np.ones_like(dg)
    expected[off] = dt[off] / dg[off]
    assert np.allclose(ens.mean, expected)


def test_ensemble_tree_input_is_all_ones():
    g = path_graph(5)
    ens = sample_tree_ensemble(g, range(4))
    assert np.allclose(ens.mean, 1.0)


def test_ensemble_requires_a_seed():
    with pytest.raises(MetricError):
        sample_tree_ensemble(path_graph(3), [])


def test_cycle_eight_ensemble_mean_stays_small():
    g = cycle_graph(8)
    ens = sample_tree_ensemble(g, range(200))
    iu = np.triu_indices(8, k=1)
    assert float(np.max(ens.mean[iu])) <= 8.0
