"""Shell-cut radius selection: feasibility grid, bad zones, audits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from treebed import MetricSpace, audit_cut_radius
from treebed.cutting import (
    S_HI_FRAC,
    S_LO_FRAC,
    _bad_zones,
    _level_cap,
    _level_width,
    _pick_radius,
    max_feasible_eps,
    shell_cut,
)

from conftest import euclidean_spaces, path_metric


def test_shell_interval_constants():
    assert S_LO_FRAC == 0.25 + 1.0 / 25.0
    assert S_HI_FRAC == 0.5 - 1.0 / 25.0


def test_max_feasible_eps_two_points():
    # counts: ball around one of two points at distance 1, diam 1; the
    # candidate grid is {1/2, 1}: count_at(1/2) = |B(u, sqrt(1/2)/4)| = 1
    # >= 1/2*2 = 1 feasible; count_at(1) = |B(u, 1/4)| = 1 < 2 infeasible.
    coords = np.array([0.0, 1.0])

    def count_at(eps):
        return int(np.sum(coords <= math.sqrt(eps) / 4.0))

    assert max_feasible_eps(count_at, 2, 1.0, 2, 1.0) == 0.5


def test_max_feasible_eps_uniform_metric():
    # n equidistant points at distance 1: ball radius sqrt(eps)/4 < 1 for
    # eps <= 1, so the count is always 1 and only eps = 1/n is feasible.
    for n in (2, 3, 5, 8):
        coords = np.zeros(n)
        coords[1:] = 1.0

        def count_at(eps):
            return int(np.sum(coords <= math.sqrt(eps) / 4.0))

        assert max_feasible_eps(count_at, n, 1.0, n, 1.0) == pytest.approx(1.0 / n)


def test_max_feasible_eps_none_when_no_candidate_works():
    assert max_feasible_eps(lambda eps: 0, 4, 1.0, 4, 1.0) is None


def test_max_feasible_eps_respects_eps_lim():
    # everything feasible: should clamp at eps_lim
    assert max_feasible_eps(lambda eps: 10**9, 16, 1.0, 16, 0.25) == 0.25


def test_level_width_saturates_at_32_eps_hat():
    # E_k = min(2k^2/((beta n)^2 eps_hat), 32 eps_hat)
    e1, _ = _level_width(1, 0.25, 1.0, 1.0, 1.0, 4, 150.0)
    assert e1 == pytest.approx(2.0 / (16.0 * 0.25))
    e_big, _ = _level_width(100, 0.25, 1.0, 1.0, 1.0, 4, 150.0)
    assert e_big == pytest.approx(32.0 * 0.25)


def test_level_cap_is_4_beta_n_eps():
    assert _level_cap(100, 0.25, 1.0, 16) == 16
    assert _level_cap(2, 0.25, 1.0, 16) == 2  # never above the point count
    assert _level_cap(100, 0.5, 1.0, 2) == 4


def test_pick_radius_midpoint_when_nothing_deleted():
    r, deleted = _pick_radius(1.0, 3.0, [])
    assert r == 2.0
    assert deleted == ()


def test_pick_radius_takes_longest_survivor():
    # deleting (1.4, 1.6) leaves [1.0,1.4] and [1.6,3.0]; the right piece
    # is longer, so r is its midpoint
    r, deleted = _pick_radius(1.0, 3.0, [(1.4, 1.6, 1, 0.1)])
    assert r == pytest.approx(2.3)
    assert len(deleted) == 1
    assert deleted[0].lo == pytest.approx(1.4)


def test_pick_radius_leftmost_on_ties():
    r, _ = _pick_radius(0.0, 3.0, [(1.0, 2.0, 1, 0.1)])
    assert r == pytest.approx(0.5)


def test_pick_radius_empty_survivors():
    r, deleted = _pick_radius(1.0, 2.0, [(0.5, 2.5, 1, 0.1)])
    assert r is None
    assert len(deleted) == 1


def test_bad_zones_merge_overlapping_windows():
    # three coords close together produce one merged level-1 zone
    coords = np.array([1.0, 1.01, 1.02])
    zones = _bad_zones(coords, 0.25, 1.0, 1.0, 1.0, 3, 1.0)
    level1 = [z for z in zones if z[2] == 1]
    assert len(level1) == 1
    lo, hi, _, _ = level1[0]
    _, w = _level_width(1, 0.25, 1.0, 1.0, 1.0, 3, 1.0)
    assert lo == pytest.approx(1.0 - w)
    assert hi == pytest.approx(1.02 + w)


def test_audit_rejects_radius_on_top_of_points():
    coords = np.array([0.0, 0.5, 0.5001, 1.0])
    assert not audit_cut_radius(0.5, coords, 0.25, 1.0, 1.0, 1.0, 4, 1.0)


def test_audit_accepts_radius_far_from_points():
    coords = np.array([0.0, 1.0])
    assert audit_cut_radius(0.5, coords, 0.5, 1.0, 1.0, 1.0, 2, 150.0)


@settings(max_examples=60, deadline=None)
@given(euclidean_spaces(max_points=10), st.integers(min_value=0, max_value=9))
def test_shell_cut_radius_always_survives_its_own_audit(m, useed):
    u = useed % m.n
    from treebed import diameter

    lam = diameter(m)
    z, zbar, cert = shell_cut(m, u, lam=lam, theta=0.0, big_c=1.0, beta=1.0,
                              n_budget=m.n, eps_lim=1.0)
    coords = m.dists_from(u)
    assert audit_cut_radius(cert.r, coords, cert.eps_hat, lam, 1.0, 1.0, m.n)
    # the two sides partition the space
    assert z.size + zbar.size == m.n
    assert z.size >= 1


@settings(max_examples=60, deadline=None)
@given(euclidean_spaces(max_points=10))
def test_shell_cut_certificate_reproduces_the_split(m):
    from treebed import diameter

    z, zbar, cert = shell_cut(m, 0, lam=diameter(m), theta=0.0, big_c=1.0,
                              beta=1.0, n_budget=m.n, eps_lim=1.0)
    tol = 1e-12 * cert.lam_hat
    mask = m.dists_from(0) <= cert.r + tol
    assert np.array_equal(np.sort(z), np.sort(m.points[mask]))
    # split distances recorded for the budget verifier, sorted ascending
    assert cert.split_pair_dists is not None
    assert np.all(np.diff(cert.split_pair_dists) >= 0)
    assert cert.split_pair_dists.size == z.size * zbar.size
