"""Randomized spanning trees via probabilistic star partitions.

Same hierarchical recursion and reset rule as the deterministic builder,
but both radii are drawn at random: the central ball radius is uniform
over a strip chosen to avoid crowded annuli, and each cone's width is a
truncated-exponential draw whose rate grows with the local point density
around the densest remaining vertex. A monotone density function f
(normalized so that 1/f integrates to 1 over [1, infinity)) converts the
radius ratio of the enclosing reset cluster into the width scale alpha.

All randomness flows through numpy Generators seeded per cluster from
(seed, recursion path), so a tree is a pure function of (graph, seed)
independent of thread schedule or traversal order.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import InvariantError, MetricError
from .graphs import WeightedGraph, shortest_path_metric, subgraph_all_pairs
from .metrics import PseudoMetricView
from .spantree import (
    CONSTANTS,
    Constants,
    ClusterParams,
    ConstructionTrace,
    SpanningTree,
    StarPart,
    StarPartition,
    _cone_view,
    _hierarchical,
    _part_radius,
    _positions,
)

__all__ = [
    "DensityFunction",
    "ConeSampler",
    "make_density",
    "validate_density",
    "density_normalization",
    "density_normalization_truncated",
    "choose_gamma",
    "sample_central_radius",
    "local_density",
    "sample_cone_radius",
    "cone_radius_cdf",
    "cone_radius_pdf",
    "prob_star_partition",
    "build_prob_spanning_tree",
    "sample_tree_ensemble",
    "EnsembleSample",
    "EnsembleResult",
]

_TOL_REL = 1e-9


@dataclass(frozen=True)
class DensityFunction:
    """Monotone density f: [1, inf) -> [1, inf) with integral of 1/f equal 1.

    Arguments below 1 are clamped to 1 before evaluation, so the function
    is total on the reals (callers feed it log radius ratios that can dip
    under 1). ``fn`` is the full normalized function; the structural
    fields (t, theta, shift, normalization) are populated for the
    iterated-log family so its normalization can be re-checked through an
    exact change of variables rather than raw quadrature on a heavy tail.
    """

    tag: str
    fn: Callable[[float], float]
    t: int | None = None
    theta: float | None = None
    shift: float = 0.0
    normalization: float = 1.0

    def __call__(self, x: float) -> float:
        return float(self.fn(max(float(x), 1.0)))


def _log_tower(t: int) -> float:
    """tower(1) = e, tower(k) = e^tower(k-1); the smallest y with
    log^(t)(y) = 1."""
    v = math.e
    for _ in range(t - 1):
        v = math.exp(v)
    return v


def _log_product(y: float, t: int, theta: float) -> float:
    """prod_{j=0}^{t-1} log^(j)(y) * (log^(t)(y))^(1+theta), log^(0) = id."""
    prod = 1.0
    v = y
    for _ in range(t):
        prod *= v
        v = math.log(v)
    return prod * v ** (1.0 + theta)


def density_normalization(density: DensityFunction) -> float:
    """Quadrature estimate of the integral of 1/f over [1, inf).

    The iterated-log family decays too slowly for direct quadrature on
    the infinite interval, so its integral is first reduced by the exact
    substitution u = log^(t)(x + shift), which collapses the log tower and
    leaves integral of u^-(1+theta) du from log^(t)(1 + shift); the
    numeric value of that reduced integral then checks the stored
    normalization constant. Other densities decay at least quadratically
    and are integrated directly.
    """
    if density.tag == "iterated_log":
        lower = 1.0 + density.shift
        for _ in range(density.t):
            lower = math.log(lower)
        expo = 1.0 + density.theta
        val, _ = quad(lambda u: u ** -expo, lower, np.inf, limit=200)
        return val / density.normalization
    val, _ = quad(lambda x: 1.0 / density(x), 1.0, np.inf, limit=200)
    return float(val)


def density_normalization_truncated(density: DensityFunction, x_max: float) -> float:
    """Integral of 1/f over [1, x_max], summed over decade blocks in log
    space so huge ranges do not defeat the quadrature."""
    if x_max <= 1.0:
        return 0.0
    total = 0.0
    u_max = math.log(x_max)
    u = 0.0
    while u < u_max:
        hi = min(u + math.log(10.0), u_max)
        blk, _ = quad(lambda t: math.exp(t) / density(math.exp(t)), u, hi, limit=200)
        total += blk
        u = hi
    return total


def validate_density(density: DensityFunction) -> None:
    """Raise MetricError unless f >= 1, f monotone, and 1/f integrates to 1."""
    f1 = density(1.0)
    if f1 < 1.0 - _TOL_REL:
        raise MetricError(f"density must satisfy f(x) >= 1 on [1, inf); f(1) = {f1}")
    grid = np.geomspace(1.0, 1e12, 400)
    vals = np.array([density(float(x)) for x in grid])
    drops = np.nonzero(vals[1:] < vals[:-1] * (1.0 - 1e-12))[0]
    if drops.size:
        i = int(drops[0])
        raise MetricError(
            f"density must be non-decreasing; f({grid[i]}) = {vals[i]} > "
            f"f({grid[i + 1]}) = {vals[i + 1]}")
    norm = density_normalization(density)
    if abs(norm - 1.0) > 1e-6:
        raise MetricError(f"1/f must integrate to 1 over [1, inf); got {norm}")


def make_density(kind: str, *, t: int = 1, theta: float = 1.0) -> DensityFunction:
    """Build a validated density: ``inverse_square`` (f(x) = x^2, exact) or
    ``iterated_log`` (f(x) = c * prod log^(j)(x + s) * (log^(t)(x + s))^(1+theta)).

    The iterated-log family as usually written starts its log tower at
    log(1) = 0, which makes 1/f non-integrable at the lower limit; the
    argument is therefore shifted by s = tower(t) - 1 so the innermost log
    reaches 1 exactly at x = 1, and the constant c = 1/theta restores the
    unit integral (substituting u = log^(t)(x + s) telescopes the tower
    away and leaves integral of u^-(1+theta) from 1, which is 1/theta).
    Large theta is rejected: it would push f(1) = c * tower-product below 1.
    """
    key = kind.replace("-", "_").strip().lower()
    if key == "inverse_square":
        df = DensityFunction(tag="inverse_square", fn=lambda x: x * x)
    elif key == "iterated_log":
        if not (isinstance(t, int) and t >= 1):
            raise MetricError(f"iterated_log needs an integer tower depth t >= 1, got {t!r}")
        if not (theta > 0.0 and math.isfinite(theta)):
            raise MetricError(f"iterated_log needs theta > 0, got {theta!r}")
        try:
            shift = _log_tower(t) - 1.0
        except OverflowError:
            raise MetricError(f"tower shift overflows for t = {t}; use t <= 3") from None
        chat = 1.0 / theta
        df = DensityFunction(
            tag="iterated_log",
            fn=lambda x, s=shift, c=chat, tt=t, th=theta: c * _log_product(x + s, tt, th),
            t=t, theta=theta, shift=shift, normalization=chat,
        )
    else:
        raise MetricError(f"unknown density kind {kind!r}")
    validate_density(df)
    return df


@dataclass(frozen=True)
class ConeSampler:
    """Truncated-exponential cone radius law on [alpha lam_hat/16, alpha lam_hat/8].

    p(r) = chi^2/(1 - chi^-2) * (32 ln chi / (alpha lam_hat)) * chi^(-32 r/(alpha lam_hat));
    the antiderivative telescopes so p integrates to exactly 1 over the interval.
    """

    chi: float
    alpha: float
    lam_hat: float

    def __post_init__(self):
        if not (self.chi >= 4.0):
            raise MetricError(f"cone sampler needs chi >= 4, got {self.chi}")
        if not (0.0 < self.alpha <= 1.0):
            raise MetricError(f"cone sampler needs alpha in (0, 1], got {self.alpha}")
        if not (self.lam_hat > 0.0):
            raise MetricError(f"cone sampler needs lam_hat > 0, got {self.lam_hat}")

    @property
    def r_min(self) -> float:
        return self.alpha * self.lam_hat / 16.0

    @property
    def r_max(self) -> float:
        return self.alpha * self.lam_hat / 8.0


def cone_radius_pdf(sampler: ConeSampler, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    chi, aw = sampler.chi, sampler.alpha * sampler.lam_hat
    rate = 32.0 * math.log(chi) / aw
    dens = chi * chi / (1.0 - chi ** -2.0) * rate * np.exp(-rate * r)
    return np.where((r >= sampler.r_min) & (r <= sampler.r_max), dens, 0.0)


def cone_radius_cdf(sampler: ConeSampler, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    chi, aw = sampler.chi, sampler.alpha * sampler.lam_hat
    rate = 32.0 * math.log(chi) / aw
    raw = chi * chi * (chi ** -2.0 - np.exp(-rate * np.clip(r, sampler.r_min, sampler.r_max)))
    return np.clip(raw / (1.0 - chi ** -2.0), 0.0, 1.0)


def sample_cone_radius(sampler: ConeSampler, rand: float) -> float:
    """Inverse-CDF draw; rand=0 gives r_min, rand -> 1 gives r_max."""
    chi = sampler.chi
    q = chi ** -2.0 - rand * (chi ** -2.0 - chi ** -4.0)
    r = -(sampler.alpha * sampler.lam_hat / (32.0 * math.log(chi))) * math.log(q)
    return float(min(max(r, sampler.r_min), sampler.r_max))


def choose_gamma(cluster, x0: int, lam_hat: float) -> float:
    """gamma in {0, 1/16} whose strip (1/2+gamma, 1/2+gamma+1/16] * lam_hat
    around x0 holds the fewest points (ties go to 0)."""
    dv = cluster.dists_from(x0)
    best_gamma, best_count = 0.0, None
    for gamma in (0.0, 1.0 / 16.0):
        lo = (0.5 + gamma) * lam_hat
        hi = (0.5 + gamma + 1.0 / 16.0) * lam_hat
        count = int(np.sum(dv <= hi)) - int(np.sum(dv <= lo))
        if best_count is None or count < best_count:
            best_gamma, best_count = gamma, count
    return best_gamma


def sample_central_radius(gamma: float, beta_rand: float, lam_hat: float) -> float:
    """(1/2 + 3 gamma/2 + beta_rand/4) * lam_hat with beta_rand in [0, 1/8]."""
    if gamma not in (0.0, 1.0 / 16.0):
        raise MetricError(f"gamma must be 0 or 1/16, got {gamma}")
    if not (0.0 <= beta_rand <= 0.125):
        raise MetricError(f"beta_rand must lie in [0, 1/8], got {beta_rand}")
    return (0.5 + 1.5 * gamma + beta_rand / 4.0) * lam_hat


def local_density(space, y0, v: int, radius: float, *, tol: float = 0.0) -> float:
    """|Y0| / |{u in Y0 : d(v, u) <= radius}| in the space's metric; >= 1."""
    pts = np.asarray(sorted(int(p) for p in y0), dtype=np.int64)
    if int(v) not in set(pts.tolist()):
        raise MetricError(f"local density needs v in Y0; {v} is not")
    dv = space.dists_from(int(v))
    pos = np.searchsorted(space.points, pts)
    count = int(np.sum(dv[pos] <= radius + tol))
    return pts.size / count


def _shortest_path_walk(g: WeightedGraph, cluster_set: set, loc: dict,
                        d_center: np.ndarray, start: int, central_set: set,
                        residue_set: set, lam_hat: float,
                        rng: np.random.Generator | None = None):
    """Walk from ``start`` toward the center along shortest paths until the
    first central-ball vertex y; returns (x, y, edge id) for the crossing
    step. Any shortest-path predecessor is a valid step; ties are broken
    uniformly at random when ``rng`` is given (smallest vertex id otherwise),
    which is what spreads the choice of crossing edge on symmetric graphs.
    Every vertex strictly before y must still be residue."""
    tol = _TOL_REL * max(lam_hat, 1.0)
    cur = int(start)
    for _ in range(g.n + 1):
        steps = []
        d_cur = d_center[loc[cur]]
        for other, w, eid in g.neighbors(cur):
            if other not in cluster_set:
                continue
            if d_center[loc[other]] + w <= d_cur + tol:
                steps.append((other, eid))
        if not steps:
            raise InvariantError(f"no shortest-path predecessor from vertex {cur}")
        steps.sort()
        if rng is not None and len(steps) > 1:
            nxt, eid = steps[int(rng.integers(len(steps)))]
        else:
            nxt, eid = steps[0]
        if nxt in central_set:
            return cur, nxt, eid
        if nxt not in residue_set:
            raise InvariantError(
                f"shortest path from {start} crossed an earlier cone at {nxt}")
        cur = nxt
    raise InvariantError("shortest-path walk failed to terminate")  # pragma: no cover


def prob_star_partition(g: WeightedGraph, X, x0: int, lam: float,
                        rng: np.random.Generator, *, density: DensityFunction,
                        n_reset: int | None = None,
                        _d_x: np.ndarray | None = None) -> StarPartition:
    """Randomized split of cluster X into a central ball plus cones.

    Draw order is fixed (beta_rand, then per cone: one uniform for the
    radius followed by the walk's tie-breaks) so a seeded generator
    reproduces the partition exactly. Cone tips are placed where the
    crossing edge meets the residue; the cone grows around the tip in
    the residue-legged potential, which keeps each part connected in its
    own subgraph with radius at most (5/8) lam_hat.
    """
    cluster = np.sort(np.asarray(list(X), dtype=np.int64))
    d_x = _d_x if _d_x is not None else subgraph_all_pairs(g, cluster)
    if not np.all(np.isfinite(d_x)):
        raise InvariantError("cluster is disconnected in its induced subgraph")
    loc = {int(p): i for i, p in enumerate(cluster)}
    if int(x0) not in loc:
        raise MetricError(f"center {x0} is not in the cluster")
    n_reset = int(n_reset) if n_reset is not None else cluster.size
    lam_hat = float(np.max(d_x[loc[int(x0)]]))

    if cluster.size == 1:
        params = ClusterParams(n_reset, lam, 0.0, None, None, None)
        part = StarPart("central", cluster, int(x0), 0.0, None, None)
        return StarPartition([part], params, int(x0))

    tol = 1e-12 * lam_hat
    alpha = 1.0 / density(math.log(2.0 * lam / lam_hat))
    params = ClusterParams(n_reset, lam, lam_hat, None, None, alpha)

    d_center = d_x[loc[int(x0)]]
    view = PseudoMetricView(points=cluster, kind="identity", base=d_x)
    gamma = choose_gamma(view, int(x0), lam_hat)
    beta_rand = rng.random() / 8.0
    r0 = sample_central_radius(gamma, beta_rand, lam_hat)
    z_mask = d_center <= r0 + tol
    z0 = cluster[z_mask]
    central_set = set(int(p) for p in z0)
    parts = [StarPart("central", z0, int(x0), _part_radius(g, z0, int(x0)), None,
                      None, radius=r0)]
    rand: dict = {"gamma": gamma, "beta_rand": beta_rand, "alpha": alpha,
                  "central_radius": r0, "cones": []}

    # chi-hat numerators/denominators are fixed at Y0 even as the residue
    # shrinks, so precompute the ball counts once.
    y0 = cluster[~z_mask]
    y0_size = y0.size
    if y0_size:
        y0_pos = _positions(cluster, y0)
        dsub = d_x[np.ix_(y0_pos, y0_pos)]
        counts = (dsub <= alpha * lam_hat / 64.0 + tol).sum(axis=1)
        chi_hat_by_id = {int(p): y0_size / int(c) for p, c in zip(y0, counts)}

    residue = y0
    residue_set = set(int(p) for p in residue)
    while residue.size:
        chi_hats = np.array([chi_hat_by_id[int(p)] for p in residue])
        vk = int(residue[int(np.argmin(chi_hats))])  # smallest id on ties
        chi_hat = float(chi_hat_by_id[vk])
        chi = max(4.0, chi_hat)
        u_draw = rng.random()
        sampler = ConeSampler(chi=chi, alpha=alpha, lam_hat=lam_hat)
        r = sample_cone_radius(sampler, u_draw)
        xk, yk, eid = _shortest_path_walk(g, set(loc), loc, d_center, vk,
                                          central_set, residue_set, lam_hat,
                                          rng)
        cview = _cone_view(g, cluster, d_center, residue, xk, int(x0))
        mask = cview.dists_from(xk) <= r + tol
        zk = residue[mask]
        residue = residue[~mask]
        residue_set = set(int(p) for p in residue)
        parts.append(StarPart("cone", zk, xk, _part_radius(g, zk, xk),
                              (yk, xk, eid), None, chi=chi, radius=r))
        rand["cones"].append({"v": vk, "chi_hat": chi_hat, "chi": chi,
                              "u": u_draw, "r": r})

    total = sum(p.points.size for p in parts)
    if total != cluster.size:
        raise InvariantError("star parts do not partition the cluster")
    bound = 0.625 * lam_hat * (1.0 + _TOL_REL)
    for p in parts:
        if p.rad > bound:
            raise InvariantError(
                f"part radius {p.rad} exceeds (5/8) lam_hat = {bound}")
    return StarPartition(parts, params, int(x0), rand=rand)


def _path_seed(seed: int, path: tuple) -> int:
    key = f"{seed}:{'/'.join(str(i) for i in path)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def build_prob_spanning_tree(g: WeightedGraph, seed: int, *,
                             density: DensityFunction | None = None,
                             root: int | None = None,
                             constants: Constants = CONSTANTS):
    """Randomized spanning tree of g; a pure function of (g, seed, density).

    Same recursion and reset rule as the deterministic builder, with the
    probabilistic star partition at every node. The root is part of the
    randomness: unless overridden it is drawn uniformly from the vertices,
    so symmetric graphs spread their dropped edges across seeds instead of
    always sacrificing the same one. Returns (tree, trace).
    """
    df = density if density is not None else make_density("inverse_square")
    metric = shortest_path_metric(g)
    radii = metric.d.max(axis=1)
    if root is None:
        root_rng = np.random.default_rng(_path_seed(int(seed), ("root",)))
        root = int(root_rng.integers(g.n))
    trace = ConstructionTrace(kind="prob", n=g.n, seed=int(seed), density=df.tag)

    def star_fn(graph, cl, center, n_r, lm, d_x, path):
        rng = np.random.default_rng(_path_seed(int(seed), path))
        return prob_star_partition(graph, cl, center, lm, rng, density=df,
                                   n_reset=n_r, _d_x=d_x)

    edge_ids = _hierarchical(g, np.arange(g.n), int(root), g.n,
                             float(radii[int(root)]), True, trace, -1,
                             constants, 150.0, None, star_fn)
    tree = SpanningTree.from_edge_ids(g, edge_ids)
    tree.validate_against(g)
    return tree, trace


@dataclass
class EnsembleSample:
    seed: int
    tree: SpanningTree
    trace: ConstructionTrace
    distortion: np.ndarray  # n x n ratios d_T/d_G, diagonal 1


@dataclass
class EnsembleResult:
    mean: np.ndarray  # per-pair mean distortion, diagonal 1
    samples: list[EnsembleSample]


def sample_tree_ensemble(g: WeightedGraph, seeds, *,
                         density: DensityFunction | None = None,
                         constants: Constants = CONSTANTS) -> EnsembleResult:
    """Mean per-pair distortion over one tree per seed (plus every sample)."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise MetricError("ensemble needs at least one seed")
    base = shortest_path_metric(g).d
    off = base > 0.0
    acc = np.zeros_like(base)
    samples: list[EnsembleSample] = []
    for seed in seeds:
        tree, trace = build_prob_spanning_tree(g, seed, density=density,
                                               constants=constants)
        dt = tree.all_pairs()
        ratio = np.ones_like(base)
        ratio[off] = dt[off] / base[off]
        samples.append(EnsembleSample(seed, tree, trace, ratio))
        acc += ratio
    return EnsembleResult(mean=acc / len(seeds), samples=samples)
