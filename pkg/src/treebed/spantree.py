"""Deterministic low-distortion spanning trees via hierarchical star partitions.

A cluster is split into a central ball around its center plus a sequence of
"cone" pieces, each hanging off the central ball by a single crossing edge.
Cutting radii come from the certified shell machinery (cutting.shell_cut)
with constants scaled so that each cut separates few close pairs relative
to its budget. The recursion tracks the last "reset" cluster's size n and
radius Lam; a child whose size-to-radius ratio is large restarts that
baseline, which is what bounds the accumulated radius blowup.

Cluster distances are shortest paths in the SUBGRAPH induced by the
cluster, recomputed per cluster. Cone pieces are grown in a potential
pseudo-metric whose tip leg is measured inside the current residue
subgraph; this keeps every piece connected in its own induced subgraph,
guarantees a crossing edge into the central ball, and preserves the
per-level radius decay in the child's own metric (the potential is a 1-D
pullback, so all cut machinery applies unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .cutting import CutCertificate, shell_cut
from .errors import InvariantError, MetricError
from .graphs import WeightedGraph, shortest_path_metric, subgraph_all_pairs, subgraph_single_source
from .metrics import PseudoMetricView

__all__ = [
    "Constants",
    "CONSTANTS",
    "ClusterParams",
    "SpanningTree",
    "StarPart",
    "StarPartition",
    "TraceNode",
    "TracePart",
    "ConstructionTrace",
    "decompose",
    "star_partition",
    "hierarchical_star_partition",
    "build_spanning_tree",
]


@dataclass(frozen=True)
class Constants:
    """Coupled constants of the construction.

    c gates the reset test, c_prime bounds the radius blowup of a cluster's
    subtree, c_hat scales the budget, C = 8 sqrt(c * c_hat) scales every
    cut radius, and C_hat = 150 * C * c_prime is the global distortion
    constant the scaling guarantee is stated with.
    """

    c: float = 2.0 * math.e
    c_prime: float = math.e * (2.0 * math.e + 1.0)
    c_hat: float = 22.0
    C: float = 8.0 * math.sqrt(2.0 * math.e * 22.0)
    C_hat: float = 150.0 * (8.0 * math.sqrt(2.0 * math.e * 22.0)) * (math.e * (2.0 * math.e + 1.0))


CONSTANTS = Constants()

_TOL_REL = 1e-9


@dataclass(frozen=True)
class ClusterParams:
    n_reset: int
    lam: float  # radius of the last reset cluster
    lam_hat: float  # radius of the cluster being partitioned
    beta: float | None  # None on singletons and probabilistic runs
    eps_lim: float | None
    alpha: float | None


@dataclass
class StarPart:
    kind: str  # "central" | "cone"
    points: np.ndarray
    center: int  # x0 for the central ball, the tip for cones
    rad: float  # radius from center inside the part's OWN subgraph
    edge: tuple[int, int, int] | None  # (y in central, x tip, edge id)
    cert: CutCertificate | None
    chi: float | None = None  # probabilistic cones only
    radius: float | None = None  # sampled cone radius (probabilistic)


@dataclass
class StarPartition:
    parts: list[StarPart]
    params: ClusterParams
    center: int
    rand: dict | None = None  # probabilistic draws, None for deterministic runs


class SpanningTree:
    """Subset of graph edges forming a spanning tree."""

    def __init__(self, n: int, edges: tuple[tuple[int, int, float], ...],
                 edge_ids: tuple[int, ...] | None = None):
        self.n = n
        self.edges = tuple((int(u), int(v), float(w)) for u, v, w in edges)
        self.edge_ids = edge_ids
        self._matrix: np.ndarray | None = None
        if len(self.edges) != n - 1:
            raise InvariantError(f"spanning tree needs n-1={n - 1} edges, got {len(self.edges)}")
        if n > 1:
            ncomp, _ = connected_components(self.csr(), directed=False)
            if ncomp != 1:
                raise InvariantError("edge set is not connected (so not a spanning tree)")

    @classmethod
    def from_edge_ids(cls, g: WeightedGraph, edge_ids) -> "SpanningTree":
        ids = tuple(sorted(int(e) for e in edge_ids))
        if len(set(ids)) != len(ids):
            raise InvariantError("duplicate edge ids in spanning tree")
        return cls(g.n, tuple(g.edges[e] for e in ids), ids)

    def csr(self) -> csr_matrix:
        if not self.edges:
            return csr_matrix((self.n, self.n))
        u = np.asarray([e[0] for e in self.edges])
        v = np.asarray([e[1] for e in self.edges])
        w = np.asarray([e[2] for e in self.edges])
        return csr_matrix(
            (np.concatenate([w, w]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(self.n, self.n),
        )

    def all_pairs(self) -> np.ndarray:
        if self._matrix is None:
            d = dijkstra(self.csr(), directed=False)
            np.fill_diagonal(d, 0.0)
            self._matrix = d
        return self._matrix

    def validate_against(self, g: WeightedGraph) -> None:
        """Every tree edge must be a graph edge (same weight)."""
        have = {(min(u, v), max(u, v)): w for u, v, w in g.edges}
        for u, v, w in self.edges:
            key = (min(u, v), max(u, v))
            if key not in have:
                raise InvariantError(f"tree edge ({u},{v}) is not a graph edge")
            if have[key] != w:
                raise InvariantError(f"tree edge ({u},{v}) weight {w} != graph weight {have[key]}")


@dataclass
class TracePart:
    kind: str
    child_id: int
    tip: int
    edge: tuple[int, int, int] | None
    cert: CutCertificate | None
    chi: float | None = None
    radius: float | None = None


@dataclass
class TraceNode:
    id: int
    parent: int
    points: np.ndarray
    center: int
    rad: float
    is_reset: bool
    n_reset: int
    lam: float
    beta: float | None = None
    eps_lim: float | None = None
    alpha: float | None = None
    parts: list[TracePart] = field(default_factory=list)
    rand: dict | None = None


@dataclass
class ConstructionTrace:
    kind: str  # "det" | "prob"
    n: int
    nodes: list[TraceNode] = field(default_factory=list)
    seed: int | None = None
    density: str | None = None

    def certificates(self):
        for node in self.nodes:
            for part in node.parts:
                if part.cert is not None:
                    yield node, part


def decompose(space, u: int, lam_hat: float, theta: float, n_reset: int,
              eps_lim: float, beta: float, *, constants: Constants = CONSTANTS,
              shell_constant: float = 150.0):
    """Cut ``space`` at a certified radius r with r/lam_hat in [theta, theta+alpha].

    Returns (Z, Z-bar, cert): Z the closed ball at r around u, and a
    certificate recording which case fired, the shell, and every deletion.
    Every separated pair at space-distance <= sqrt(eps) lam_hat/(150 C)
    stays within the eps * |Z| (n_reset - |Z|) beta budget for eps in
    (0, eps_lim]; verify_decompose_budget re-checks that from the
    certificate alone.
    """
    n_w = space.n
    if n_reset < n_w:
        raise MetricError(f"precondition n_reset >= |W| violated: {n_reset} < {n_w}")
    if eps_lim < n_w / (beta * n_reset) * (1.0 - _TOL_REL):
        raise MetricError(
            f"precondition eps_lim >= |W|/(beta n_reset) violated: "
            f"{eps_lim} < {n_w / (beta * n_reset)}")
    space.local_index(u)  # membership check
    return shell_cut(space, u, lam=lam_hat, theta=theta, big_c=constants.C,
                     beta=beta, n_budget=n_reset, eps_lim=eps_lim,
                     shell_constant=shell_constant, case_split=True)


def _positions(cluster: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Positions of ``sub``'s members inside sorted ``cluster``."""
    pos = np.searchsorted(cluster, sub)
    return pos


def _part_radius(g: WeightedGraph, points: np.ndarray, center: int) -> float:
    """Radius from center inside the subgraph induced by ``points``."""
    if points.size == 1:
        return 0.0
    pos = int(np.searchsorted(points, center))
    d = subgraph_single_source(g, points, pos)
    rad = float(np.max(d))
    if not math.isfinite(rad):
        raise InvariantError("a star part is disconnected in its own subgraph")
    return rad


def _crossing_edge(g: WeightedGraph, d_from_center: np.ndarray, loc: dict,
                   central_set: set, tip: int, lam_hat: float) -> tuple[int, int, int]:
    """Graph edge (y, tip) with y in the central ball lying on a shortest
    center-to-tip path; smallest edge id on ties."""
    tol = _TOL_REL * max(lam_hat, 1.0)
    d_tip = d_from_center[loc[tip]]
    best = None
    for other, w, eid in g.neighbors(tip):
        if other not in central_set:
            continue
        if d_from_center[loc[other]] + w <= d_tip + tol:
            if best is None or eid < best[2]:
                best = (other, tip, eid)
    if best is None:
        raise InvariantError(
            f"no crossing edge from tip {tip} into the central ball")
    return best


def _cone_view(g: WeightedGraph, cluster: np.ndarray, d_from_center: np.ndarray,
               residue: np.ndarray, tip: int, apex: int) -> PseudoMetricView:
    """Potential view over the residue: phi(v) = d(x0, tip) + d_res(tip, v)
    - d(x0, v), with the tip leg inside the residue subgraph. Unreachable
    residue vertices get +inf and fall outside every cone."""
    tip_pos = int(np.searchsorted(residue, tip))
    d_res = subgraph_single_source(g, residue, tip_pos)
    rpos = _positions(cluster, residue)
    with np.errstate(invalid="ignore"):
        phi = d_from_center[np.searchsorted(cluster, tip)] + d_res - d_from_center[rpos]
    phi = np.where(np.isnan(phi), np.inf, phi)
    phi = np.maximum(phi, 0.0)  # exact math gives phi >= 0; clip float dust
    return PseudoMetricView(points=residue, kind="cone", potential=phi,
                            apex=int(apex), tip=int(tip))


def star_partition(g: WeightedGraph, X, x0: int, n_reset: int, lam: float, *,
                   constants: Constants = CONSTANTS, shell_constant: float = 150.0,
                   _d_x: np.ndarray | None = None) -> StarPartition:
    """Split cluster X into a central ball around x0 plus connected cones.

    Every part is connected in its own induced subgraph and has radius at
    most (1/2 + alpha) * rad_{x0}(X) from its center; each cone attaches to
    the central ball by one recorded graph edge.
    """
    cluster = np.sort(np.asarray(list(X), dtype=np.int64))
    d_x = _d_x if _d_x is not None else subgraph_all_pairs(g, cluster)
    if not np.all(np.isfinite(d_x)):
        raise InvariantError("cluster is disconnected in its induced subgraph")
    loc = {int(p): i for i, p in enumerate(cluster)}
    if int(x0) not in loc:
        raise MetricError(f"center {x0} is not in the cluster")
    lam_hat = float(np.max(d_x[loc[int(x0)]]))

    if cluster.size == 1:
        params = ClusterParams(n_reset, lam, 0.0, None, None, None)
        part = StarPart("central", cluster, int(x0), 0.0, None, None)
        return StarPartition([part], params, int(x0))

    beta = (1.0 / constants.c_hat) * (lam_hat / lam) ** 0.25
    eps_lim = cluster.size / (beta * n_reset)
    alpha = math.sqrt(eps_lim) / constants.C
    if alpha > 0.125 * (1.0 + _TOL_REL):
        raise InvariantError(
            f"alpha={alpha} exceeds 1/8; reset bookkeeping is broken")
    params = ClusterParams(n_reset, lam, lam_hat, beta, eps_lim, alpha)

    d_center = d_x[loc[int(x0)]]
    ispace = PseudoMetricView(points=cluster, kind="identity", base=d_x)
    z, residue, cert0 = decompose(ispace, int(x0), lam_hat, 0.5, n_reset,
                                  eps_lim, beta, constants=constants,
                                  shell_constant=shell_constant)
    parts = [StarPart("central", z, int(x0), _part_radius(g, z, int(x0)), None, cert0)]
    central_set = set(int(p) for p in z)

    while residue.size:
        rpos = _positions(cluster, residue)
        tip = int(residue[int(np.argmin(d_center[rpos]))])  # nearest, smallest id on ties
        edge = _crossing_edge(g, d_center, loc, central_set, tip, lam_hat)
        cspace = _cone_view(g, cluster, d_center, residue, tip, int(x0))
        zk, residue, cert = decompose(cspace, tip, lam_hat, 0.0, n_reset,
                                      eps_lim, beta, constants=constants,
                                      shell_constant=shell_constant)
        parts.append(StarPart("cone", zk, tip, _part_radius(g, zk, tip), edge, cert))

    total = sum(p.points.size for p in parts)
    if total != cluster.size:
        raise InvariantError("star parts do not partition the cluster")
    bound = (0.5 + alpha) * lam_hat * (1.0 + _TOL_REL)
    for p in parts:
        if p.rad > bound:
            raise InvariantError(
                f"part radius {p.rad} exceeds (1/2+alpha) lam_hat = {bound}")
    return StarPartition(parts, params, int(x0))


def _hierarchical(g: WeightedGraph, cluster: np.ndarray, center: int, n_reset: int,
                  lam: float, is_reset: bool, trace: ConstructionTrace, parent_id: int,
                  constants: Constants, shell_constant: float,
                  d_x: np.ndarray | None, star_fn,
                  path: tuple[int, ...] = ()) -> list[int]:
    cluster = np.sort(np.asarray(cluster, dtype=np.int64))
    if d_x is None and cluster.size > 1:
        d_x = subgraph_all_pairs(g, cluster)
    nid = len(trace.nodes)
    if cluster.size == 1:
        trace.nodes.append(TraceNode(nid, parent_id, cluster, int(center), 0.0,
                                     is_reset, n_reset, lam))
        return []
    rad = float(np.max(d_x[int(np.searchsorted(cluster, center))]))
    if not math.isfinite(rad):
        raise InvariantError("cluster is disconnected in its induced subgraph")
    node = TraceNode(nid, parent_id, cluster, int(center), rad, is_reset, n_reset, lam)
    trace.nodes.append(node)

    sp = star_fn(g, cluster, int(center), n_reset, lam, d_x, path)
    node.beta = sp.params.beta
    node.eps_lim = sp.params.eps_lim
    node.alpha = sp.params.alpha
    node.rand = sp.rand

    edge_ids: list[int] = []
    for part_index, part in enumerate(sp.parts):
        # Reset test: restart the (n, Lam) baseline when the part is large
        # for its radius; the center of the central part is the parent center.
        non_reset = part.points.size / n_reset <= constants.c * part.rad / lam
        if non_reset:
            child_n, child_lam = n_reset, lam
        else:
            child_n, child_lam = int(part.points.size), part.rad
        child_id = len(trace.nodes)
        node.parts.append(TracePart(part.kind, child_id, part.center, part.edge,
                                    part.cert, part.chi, part.radius))
        edge_ids.extend(_hierarchical(g, part.points, part.center, child_n, child_lam,
                                      not non_reset, trace, nid, constants,
                                      shell_constant, None, star_fn,
                                      path + (part_index,)))
        if part.edge is not None:
            edge_ids.append(part.edge[2])
    return edge_ids


def hierarchical_star_partition(g: WeightedGraph, X, x: int, n_reset: int, lam: float, *,
                                constants: Constants = CONSTANTS,
                                shell_constant: float = 150.0):
    """Recursive star partition of X rooted at x, treated as a reset cluster.

    Returns (SpanningTree, ConstructionTrace). X must be g's full vertex set
    for the result to be spanning; the recursion itself works on any
    connected cluster.
    """
    cluster = np.sort(np.asarray(list(X), dtype=np.int64))
    trace = ConstructionTrace(kind="det", n=g.n)

    def star_fn(graph, cl, center, n_r, lm, d_x, path):
        return star_partition(graph, cl, center, n_r, lm, constants=constants,
                              shell_constant=shell_constant, _d_x=d_x)

    edge_ids = _hierarchical(g, cluster, int(x), n_reset, lam, True, trace, -1,
                             constants, shell_constant, None, star_fn)
    tree = SpanningTree.from_edge_ids(g, edge_ids)
    if tree.n != cluster.size:
        raise InvariantError("hierarchical partition did not span the cluster")
    return tree, trace


def build_spanning_tree(g: WeightedGraph, *, root: int | None = None,
                        constants: Constants = CONSTANTS,
                        shell_constant: float = 150.0):
    """Spanning tree of g with certified per-cut budgets and radius decay.

    The root defaults to a vertex minimizing rad_x(g) (smallest id on
    ties); the full vertex set starts as a reset cluster with n = |V| and
    Lam = rad_root.
    """
    metric = shortest_path_metric(g)  # also proves connectivity
    radii = metric.d.max(axis=1)
    if root is None:
        root = int(np.argmin(radii))
    tree, trace = hierarchical_star_partition(
        g, np.arange(g.n), int(root), g.n, float(radii[int(root)]),
        constants=constants, shell_constant=shell_constant)
    tree.validate_against(g)
    return tree, trace
