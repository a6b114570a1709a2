"""Distortion measurement and construction-trace auditing.

All pair statistics run over UNORDERED pairs with the uniform
distribution, enumerated in row-major upper-triangle order. Embeddings
are expected to be non-contractive; a contracting pair triggers a warning
(not an error) so diagnostic runs on arbitrary inputs still produce
numbers.

The two verifiers re-check, from recorded certificates and traces alone,
the guarantees the builders claim: per-cut budgets on freshly separated
close pairs, and the per-level radius decay plus bounded blowup of each
cluster's subtree. Both quantified-over-epsilon checks reduce to finitely
many breakpoints because both sides are step functions of epsilon.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .cutting import CutCertificate
from .errors import InvariantError, MetricError
from .metrics import MetricSpace
from .spantree import CONSTANTS, Constants, ConstructionTrace, SpanningTree
from .ultrametric import UltrametricTree

__all__ = [
    "DistanceMap",
    "DistortionReport",
    "ScalingProfile",
    "ScalingCheck",
    "BudgetCheck",
    "NodeRadiusCheck",
    "RadiusCheck",
    "pairwise_distortions",
    "lq_distortion",
    "scaling_profile",
    "count_bad_pairs",
    "check_scaling_guarantee",
    "verify_decompose_budget",
    "verify_radius_invariants",
    "tree_all_pairs",
    "make_report",
    "BAD_COUNT_EPS_GRID",
]

_TOL_REL = 1e-9

BAD_COUNT_EPS_GRID = (0.01, 0.02, 0.05, 0.1, 0.2, 0.25, 0.5, 1.0)


class DistanceMap:
    """Embedded distance as both a pair callable and a dense matrix."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise MetricError(f"distance map needs a square matrix, got {matrix.shape}")
        self.matrix = matrix
        self.n = matrix.shape[0]

    def __call__(self, x: int, y: int) -> float:
        return float(self.matrix[int(x), int(y)])


def tree_all_pairs(t) -> DistanceMap:
    """Embedded distances of a spanning tree (path lengths) or an
    ultrametric tree (ancestor labels)."""
    if isinstance(t, SpanningTree):
        return DistanceMap(t.all_pairs())
    if isinstance(t, UltrametricTree):
        return DistanceMap(t.all_pairs_matrix())
    raise MetricError(f"cannot compute tree distances for {type(t).__name__}")


def _embedded_matrix(base_n: int, embedded) -> np.ndarray:
    if isinstance(embedded, DistanceMap):
        mat = embedded.matrix
    elif isinstance(embedded, np.ndarray):
        mat = embedded
    elif isinstance(embedded, (SpanningTree, UltrametricTree)):
        mat = tree_all_pairs(embedded).matrix
    elif callable(embedded):
        mat = np.zeros((base_n, base_n))
        for i in range(base_n):
            for j in range(i + 1, base_n):
                mat[i, j] = mat[j, i] = float(embedded(i, j))
    else:
        raise MetricError(f"cannot interpret {type(embedded).__name__} as embedded distances")
    if mat.shape != (base_n, base_n):
        raise MetricError(
            f"embedded distances have shape {mat.shape}, expected {(base_n, base_n)}")
    return mat


def pairwise_distortions(base: MetricSpace, embedded) -> np.ndarray:
    """All C(n,2) ratios embedded/base in row-major upper-triangle order.

    ``embedded`` may be a pair callable, a DistanceMap, a dense matrix, or
    a tree. Duplicate base points (distance 0) are an error; contraction
    (some ratio < 1) only warns.
    """
    n = base.n
    if n < 2:
        raise MetricError("distortion needs at least two points")
    iu, ju = np.triu_indices(n, k=1)
    bvals = base.d[iu, ju]
    if np.any(bvals <= 0.0):
        k = int(np.argmax(bvals <= 0.0))
        raise MetricError(
            f"base distance between {iu[k]} and {ju[k]} is zero; distortion undefined")
    evals = _embedded_matrix(n, embedded)[iu, ju]
    ratios = evals / bvals
    if np.any(ratios < 1.0 - _TOL_REL):
        k = int(np.argmax(ratios < 1.0 - _TOL_REL))
        warnings.warn(
            f"embedding contracts pair ({iu[k]}, {ju[k]}): ratio {ratios[k]}",
            stacklevel=2)
    return ratios


def lq_distortion(values, q) -> float:
    """q-th power mean of the distortions; q = inf gives the maximum."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise MetricError("lq distortion of an empty value set")
    if q == math.inf:
        return float(np.max(values))
    q = float(q)
    if q < 1.0:
        raise MetricError(f"q must be >= 1, got {q}")
    if q == 1.0:
        return float(np.mean(values))
    return float(np.mean(values ** q) ** (1.0 / q))


@dataclass(frozen=True)
class ScalingProfile:
    """Distortions sorted descending; rank k covers the (k/N)-quantile.

    alpha_emp(eps) is the bound that holds once the worst floor(eps * N)
    pairs are excluded: the value at rank floor(eps*N) + 1. The floor
    convention means alpha_emp is right-continuous and drops exactly AT
    eps = k/N, matching the k worst pairs becoming excludable there.
    """

    sorted_desc: np.ndarray
    n: int
    n_pairs: int

    def alpha_emp(self, eps: float) -> float:
        if not 0.0 <= eps <= 1.0:
            raise MetricError(f"eps must lie in [0, 1], got {eps}")
        idx = min(int(math.floor(eps * self.n_pairs + 1e-9)), self.n_pairs - 1)
        return float(self.sorted_desc[idx])

    def rows(self) -> list[dict]:
        """(rank, epsilon, distortion) rows, rank 1..N descending by value."""
        return [
            {"rank": k + 1, "epsilon": (k + 1) / self.n_pairs,
             "distortion": float(self.sorted_desc[k])}
            for k in range(self.n_pairs)
        ]


def scaling_profile(values, n: int) -> ScalingProfile:
    values = np.asarray(values, dtype=np.float64)
    expected = n * (n - 1) // 2
    if values.size != expected:
        raise MetricError(
            f"profile needs all C({n},2) = {expected} values, got {values.size}")
    return ScalingProfile(sorted_desc=np.sort(values)[::-1].copy(), n=n,
                          n_pairs=expected)


def count_bad_pairs(base: MetricSpace, embedded, eps: float, K: float) -> int:
    """#{unordered pairs with embedded/base > K/sqrt(eps)} (slack 1e-9)."""
    if not 0.0 < eps <= 1.0:
        raise MetricError(f"eps must lie in (0, 1], got {eps}")
    if not K > 0.0:
        raise MetricError(f"K must be positive, got {K}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = pairwise_distortions(base, embedded)
    threshold = K / math.sqrt(eps)
    return int(np.sum(values > threshold * (1.0 + _TOL_REL)))


@dataclass(frozen=True)
class ScalingCheck:
    passed: bool
    K: float
    n_pairs: int
    margin: float  # min over ranks of bound/value; >= 1 iff passed
    worst_eps: float | None  # rank/N at the tightest (or first failing) rank
    worst_rank: int | None


def check_scaling_guarantee(base: MetricSpace, embedded, K: float) -> ScalingCheck:
    """Does count_bad_pairs(eps, K) <= eps * C(n,2) hold for every eps?

    Both sides are step functions of eps, changing only where a distortion
    value crosses its threshold (eps = (K/v)^2) or the budget passes an
    integer (eps = k/N). Quantifying over all eps in (0, 1] is therefore
    equivalent to the rank condition: the k-th largest distortion v_(k)
    must satisfy v_(k) <= K * sqrt(N/k) for every k. (If some v_(k)
    exceeded its rank bound, then just below eps = k/N at least k pairs
    would exceed the threshold with budget < k; conversely any eps
    violation implies a violated rank.)
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        values = pairwise_distortions(base, embedded)
    prof = np.sort(values)[::-1]
    n_pairs = prof.size
    ranks = np.arange(1, n_pairs + 1, dtype=np.float64)
    bounds = K * np.sqrt(n_pairs / ranks)
    with np.errstate(divide="ignore"):
        margins = bounds / prof
    ok = prof <= bounds * (1.0 + _TOL_REL)
    passed = bool(np.all(ok))
    if passed:
        k = int(np.argmin(margins))
    else:
        k = int(np.argmax(~ok))
    return ScalingCheck(passed=passed, K=float(K), n_pairs=n_pairs,
                        margin=float(margins[k]), worst_eps=(k + 1) / n_pairs,
                        worst_rank=k + 1)


@dataclass(frozen=True)
class BudgetCheck:
    passed: bool
    margin: float  # min over breakpoints of budget/count
    worst_eps: float | None
    n_split_pairs: int
    n_checked: int


def verify_decompose_budget(cert: CutCertificate, *, n_reset: int | None = None,
                            beta: float | None = None, eps_lim: float | None = None,
                            lam_hat: float | None = None) -> BudgetCheck:
    """Re-check one cut's budget from its certificate alone.

    For every eps in (0, min(eps_lim, 1)], the number of separated pairs
    at space-distance <= sqrt(eps) * lam_hat / (shell_constant * big_c)
    must not exceed eps * |Z| * (n_reset - |Z|) * beta. The count jumps
    only at eps_p = (shell_constant * big_c * dist_p / lam_hat)^2, so
    checking each jump point (exact counting, 1e-9 slack on the budget
    comparison) covers the whole range. A separated pair at distance 0 is
    counted at every eps and fails against the vanishing budget.
    """
    if cert.split_pair_dists is None or cert.z is None:
        raise MetricError(
            "certificate lacks the split-pair distances; budgets can only be "
            "verified on certificates produced in this process")
    n_reset = int(n_reset) if n_reset is not None else cert.n_reset
    beta = float(beta) if beta is not None else cert.beta
    eps_lim = float(eps_lim) if eps_lim is not None else cert.eps_lim
    lam_hat = float(lam_hat) if lam_hat is not None else cert.lam_hat
    dists = np.sort(np.asarray(cert.split_pair_dists, dtype=np.float64))
    n_split = dists.size
    if n_split == 0:
        return BudgetCheck(True, math.inf, None, 0, 0)
    budget0 = cert.z.size * (n_reset - cert.z.size) * beta
    eps_cap = min(eps_lim, 1.0)
    if np.any(dists <= 0.0):
        return BudgetCheck(False, 0.0, 0.0, n_split, 1)
    scale = cert.shell_constant * cert.big_c / lam_hat
    with np.errstate(over="ignore"):
        eps_p = (scale * dists) ** 2.0
    counts = np.searchsorted(dists, dists, side="right")  # rank incl. ties
    in_range = eps_p <= eps_cap
    n_checked = int(np.sum(in_range))
    if n_checked == 0:
        return BudgetCheck(True, math.inf, None, n_split, 0)
    budgets = eps_p[in_range] * budget0
    cts = counts[in_range].astype(np.float64)
    margins = budgets / cts
    k = int(np.argmin(margins))
    passed = bool(np.all(cts <= budgets * (1.0 + _TOL_REL)))
    return BudgetCheck(passed=passed, margin=float(margins[k]),
                       worst_eps=float(eps_p[in_range][k]), n_split_pairs=n_split,
                       n_checked=n_checked)


@dataclass(frozen=True)
class NodeRadiusCheck:
    node_id: int
    decay_ok: bool  # child radius <= (5/8) parent radius (non-reset nodes)
    cprime_ok: bool  # subtree radius <= c' * cluster radius
    rad: float
    tree_rad: float


@dataclass(frozen=True)
class RadiusCheck:
    passed: bool
    nodes: tuple[NodeRadiusCheck, ...] = field(repr=False)
    worst_node: int | None = None


def _subtree_radius(tree: SpanningTree, points: np.ndarray, center: int) -> float:
    """Radius from center inside the tree's subgraph induced by points;
    +inf when that induced subtree is disconnected."""
    if points.size == 1:
        return 0.0
    idx = np.asarray(points, dtype=np.int64)
    sub = tree.csr()[idx][:, idx]
    src = int(np.searchsorted(idx, center))
    d = dijkstra(sub, directed=False, indices=src)
    d[src] = 0.0
    return float(np.max(d))


def verify_radius_invariants(trace: ConstructionTrace, tree: SpanningTree, *,
                             constants: Constants = CONSTANTS) -> RadiusCheck:
    """Audit a construction trace against its tree.

    Per node: (a) if the node did NOT reset the baseline, its cluster
    radius is at most 5/8 of its parent's (slack 1e-9 relative); (b) the
    tree's subtree induced by the node's points, measured from the node's
    center, has radius at most c' times the node's cluster radius. The
    root counts as a reset node, so (a) never applies to it.
    """
    checks: list[NodeRadiusCheck] = []
    worst = None
    for node in trace.nodes:
        decay_ok = True
        if not node.is_reset:
            parent = trace.nodes[node.parent]
            decay_ok = node.rad <= 0.625 * parent.rad * (1.0 + _TOL_REL)
        tree_rad = _subtree_radius(tree, node.points, node.center)
        cprime_ok = tree_rad <= constants.c_prime * node.rad * (1.0 + _TOL_REL)
        if node.rad == 0.0:
            cprime_ok = tree_rad == 0.0
        checks.append(NodeRadiusCheck(node.id, decay_ok, cprime_ok,
                                      node.rad, tree_rad))
        if worst is None and not (decay_ok and cprime_ok):
            worst = node.id
    passed = all(c.decay_ok and c.cprime_ok for c in checks)
    return RadiusCheck(passed=passed, nodes=tuple(checks), worst_node=worst)


@dataclass
class DistortionReport:
    n: int
    values: np.ndarray
    lq: dict[str, float]
    profile: ScalingProfile
    bad_counts: list[dict]
    checks: dict[str, str]

    def to_json_obj(self) -> dict:
        return {
            "n": self.n,
            "lq": self.lq,
            "profile": self.profile.rows(),
            "bad_counts": self.bad_counts,
            "checks": self.checks,
        }


def _q_key(q) -> str:
    if q == math.inf:
        return "inf"
    qf = float(q)
    return str(int(qf)) if qf == int(qf) else str(qf)


def make_report(base: MetricSpace, embedded, *, K: float = 150.0,
                q_values=(1.0, 2.0, math.inf), trace: ConstructionTrace | None = None,
                tree: SpanningTree | None = None,
                constants: Constants = CONSTANTS) -> DistortionReport:
    """Full distortion report; trace-dependent checks read "skipped" when
    the trace (or its in-memory certificates) is absent."""
    values = pairwise_distortions(base, embedded)
    qs = sorted(set(float(q) for q in q_values) | {1.0, 2.0, math.inf})
    lq = {_q_key(q): lq_distortion(values, q) for q in qs}
    ordered = [lq[_q_key(q)] for q in qs]
    for a, b in zip(ordered, ordered[1:]):
        if b < a * (1.0 - _TOL_REL):
            raise InvariantError(f"lq distortion not monotone in q: {lq}")
    prof = scaling_profile(values, base.n)
    n_pairs = prof.n_pairs
    bad_counts = []
    for eps in BAD_COUNT_EPS_GRID:
        threshold = K / math.sqrt(eps)
        count = int(np.sum(values > threshold * (1.0 + _TOL_REL)))
        bad_counts.append({"epsilon": eps, "threshold": threshold,
                           "count": count, "budget": eps * n_pairs})
    scaling = check_scaling_guarantee(base, embedded, K)
    checks = {"scaling": "pass" if scaling.passed else "fail"}
    if trace is None or tree is None:
        checks["radius"] = "skipped"
    else:
        radius = verify_radius_invariants(trace, tree, constants=constants)
        checks["radius"] = "pass" if radius.passed else "fail"
    certs = [] if trace is None else [part.cert for _, part in trace.certificates()]
    if not certs or any(c.split_pair_dists is None for c in certs):
        checks["budget"] = "skipped"
    else:
        ok = all(verify_decompose_budget(c).passed for c in certs)
        checks["budget"] = "pass" if ok else "fail"
    return DistortionReport(n=base.n, values=values, lq=lq, profile=prof,
                            bad_counts=bad_counts, checks=checks)
