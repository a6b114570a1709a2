"""Recursive ultrametric embedding with certified cut radii.

Each cluster is split at a radius from a half-center that is simultaneously
good for every scale: the number of points in any eps-window around the cut
stays below the budget that makes at most an eps-fraction of pairs stretch
beyond shell_constant/sqrt(eps). Labels are exact cluster diameters, so the
embedding is non-contractive by construction and dominated by the top-level
diameter.
"""

from __future__ import annotations

import math

import numpy as np

from . import cutting
from .cutting import CutCertificate, S_HI_FRAC, S_LO_FRAC
from .errors import CutSelectionError, InvariantError, MetricError
from .metrics import MetricSpace, diameter, find_half_center, induced_submetric

__all__ = [
    "UltrametricTree",
    "epsilon_hat",
    "choose_cut_radius",
    "partition_step",
    "build_ultrametric",
    "ultrametric_distance",
]


def epsilon_hat(m: MetricSpace, u: int) -> float:
    """Largest eps in (0, 1] with |B(u, sqrt(eps) diam / 4)| >= eps n.

    The ball count is a step function of eps and the requirement is linear,
    so the maximum sits on the candidate grid k/n (see cutting). With u a
    half-center the result lands in [1/n, 1/2].
    """
    n = m.n
    if n < 2:
        raise MetricError(f"epsilon_hat needs at least two points, got n={n}")
    delta = diameter(m)
    coords_sorted = np.sort(m.dists_from(u))
    tol = 1e-12 * delta

    def count_at(eps):
        return int(np.searchsorted(coords_sorted, math.sqrt(eps) / 4.0 * delta + tol, "right"))

    eps = cutting.max_feasible_eps(count_at, n, 1.0, n, 1.0)
    assert eps is not None  # the center itself keeps k=1 feasible
    return eps


def choose_cut_radius(m: MetricSpace, u: int, eps_hat: float, *,
                      shell_constant: float = 150.0) -> CutCertificate:
    """Pick a cut radius in S = [0.29, 0.46] * sqrt(eps_hat) * diam.

    Bad radii (where some eps-window around r is overcrowded) are removed
    from S as a union of open intervals; the certificate records every
    removal and the chosen midpoint. Emptying S contradicts the length
    accounting behind the shell bounds, so it raises CutSelectionError
    rather than returning a fallback.
    """
    n = m.n
    if n < 2:
        raise MetricError("choose_cut_radius needs at least two points")
    delta = diameter(m)
    tol = 1e-12 * delta
    dvec = m.dists_from(u)
    scale = math.sqrt(eps_hat) * delta
    s_lo, s_hi = S_LO_FRAC * scale, S_HI_FRAC * scale
    zones = cutting._bad_zones(np.sort(dvec), eps_hat, delta, 1.0, 1.0, n, shell_constant)
    r, deleted = cutting._pick_radius(s_lo, s_hi, zones)
    if r is None:
        raise CutSelectionError(
            "interval deletion emptied the admissible shell",
            certificate=CutCertificate(
                u=int(u), eps_hat=eps_hat, S_lo=s_lo, S_hi=s_hi, deleted=deleted,
                r=math.nan, case=1, theta=0.0, alpha=1.0, lam_hat=delta, beta=1.0,
                n_reset=n, eps_lim=1.0, big_c=1.0, shell_constant=shell_constant,
                n_points=n),
        )
    if not cutting.audit_cut_radius(r, dvec, eps_hat, delta, 1.0, 1.0, n, shell_constant):
        raise InvariantError(f"chosen radius {r} fails its crowding audit")  # pragma: no cover
    z_mask = dvec <= r + tol
    return CutCertificate(
        u=int(u), eps_hat=eps_hat, S_lo=s_lo, S_hi=s_hi, deleted=deleted, r=r,
        case=1, theta=0.0, alpha=1.0, lam_hat=delta, beta=1.0, n_reset=n,
        eps_lim=1.0, big_c=1.0, shell_constant=shell_constant, n_points=n,
        z=m.points[z_mask], zbar=m.points[~z_mask],
        split_pair_dists=cutting._cross_dists(m, z_mask),
    )


def partition_step(m: MetricSpace, u: int, cert: CutCertificate):
    """(X1, X2) = (closed ball at the certified radius, complement)."""
    tol = 1e-12 * cert.lam_hat
    dvec = m.dists_from(u)
    mask = dvec <= cert.r + tol
    x1, x2 = m.points[mask], m.points[~mask]
    if x1.size == 0 or x2.size == 0:
        raise InvariantError("cut radius produced an empty side")
    if x2.size < m.n / 2.0:
        raise InvariantError(
            f"complement holds {x2.size} < n/2 points; was u a half-center?")
    return x1, x2


class UltrametricTree:
    """Rooted labelled tree realizing an ultrametric on its leaves.

    Node ids are assigned in construction order (root first, each internal
    node before both children, the near side before the far side). Leaves
    carry label 0 and map bijectively onto the input points.
    """

    def __init__(self, n_points: int):
        self.n = n_points
        self.labels: list[float] = []
        self.children: list[list[int]] = []
        self.parents: list[int] = []
        self.leaf_point: list[int | None] = []
        self.centers: list[int | None] = []
        self.certs: list[CutCertificate | None] = []
        self.leaf_of_point = np.full(n_points, -1, dtype=np.int64)
        self._depth: np.ndarray | None = None
        self._matrix: np.ndarray | None = None

    # -- construction ------------------------------------------------------

    def _add_node(self, label: float, parent: int, point: int | None,
                  center: int | None, cert) -> int:
        nid = len(self.labels)
        self.labels.append(float(label))
        self.children.append([])
        self.parents.append(parent)
        self.leaf_point.append(point)
        self.centers.append(center)
        self.certs.append(cert)
        if parent >= 0:
            self.children[parent].append(nid)
        if point is not None:
            self.leaf_of_point[point] = nid
        return nid

    # -- queries -----------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def is_leaf(self, nid: int) -> bool:
        return self.leaf_point[nid] is not None

    def _depths(self) -> np.ndarray:
        if self._depth is None:
            d = np.zeros(self.num_nodes, dtype=np.int64)
            for nid in range(1, self.num_nodes):
                d[nid] = d[self.parents[nid]] + 1  # parents precede children
            self._depth = d
        return self._depth

    def distance(self, x: int, y: int) -> float:
        """Label of the least common ancestor of the two leaves."""
        if not (0 <= x < self.n and 0 <= y < self.n):
            raise MetricError(f"unknown leaf point in pair ({x}, {y})")
        if x == y:
            return 0.0
        a, b = int(self.leaf_of_point[x]), int(self.leaf_of_point[y])
        if a < 0 or b < 0:
            raise MetricError(f"point missing from the tree in pair ({x}, {y})")
        depth = self._depths()
        while a != b:
            if depth[a] >= depth[b]:
                a = self.parents[a]
            else:
                b = self.parents[b]
        return self.labels[a]

    def all_pairs_matrix(self) -> np.ndarray:
        """Dense leaf-distance matrix.

        Children carry higher ids than parents, so one reverse sweep has
        every node's leaf set ready before its parent combines them; each
        internal node writes its label onto the cross blocks, touching every
        unordered pair exactly once.
        """
        if self._matrix is None:
            mat = np.zeros((self.n, self.n))
            leafsets: list[np.ndarray | None] = [None] * self.num_nodes
            for nid in range(self.num_nodes - 1, -1, -1):
                if self.is_leaf(nid):
                    leafsets[nid] = np.asarray([self.leaf_point[nid]], dtype=np.int64)
                    continue
                acc = leafsets[self.children[nid][0]]
                for kid in self.children[nid][1:]:
                    nxt = leafsets[kid]
                    mat[np.ix_(acc, nxt)] = self.labels[nid]
                    mat[np.ix_(nxt, acc)] = self.labels[nid]
                    acc = np.concatenate([acc, nxt])
                leafsets[nid] = acc
            self._matrix = mat
        return self._matrix

    def internal_nodes(self):
        return [nid for nid in range(self.num_nodes) if not self.is_leaf(nid)]

    # -- serialization -----------------------------------------------------

    def to_json_obj(self) -> dict:
        def encode(nid: int) -> dict:
            if self.is_leaf(nid):
                return {"id": nid, "label": 0.0, "leaf_point": int(self.leaf_point[nid])}
            return {
                "id": nid,
                "label": self.labels[nid],
                "children": [encode(k) for k in self.children[nid]],
            }
        return encode(0)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "UltrametricTree":
        leaves: list[int] = []

        def scan(node):
            if "leaf_point" in node:
                leaves.append(int(node["leaf_point"]))
            else:
                for kid in node.get("children", []):
                    scan(kid)

        scan(obj)
        if not leaves:
            raise MetricError("ultrametric JSON has no leaves")
        n = len(leaves)
        if sorted(leaves) != list(range(n)):
            raise MetricError("ultrametric leaves must cover points 0..n-1 exactly once")
        tree = cls(n)

        def build(node, parent: int, bound: float):
            label = float(node["label"])
            if label > bound * (1.0 + 1e-12) + 1e-300:
                raise MetricError(
                    f"node {node.get('id')} label {label} exceeds its ancestor's")
            if "leaf_point" in node:
                if label != 0.0:
                    raise MetricError("leaf labels must be 0")
                tree._add_node(0.0, parent, int(node["leaf_point"]), None, None)
                return
            kids = node.get("children", [])
            if len(kids) < 2:
                raise MetricError("internal ultrametric nodes need >= 2 children")
            if label <= 0.0:
                raise MetricError("internal ultrametric labels must be positive")
            nid = tree._add_node(label, parent, None, None, None)
            for kid in kids:
                build(kid, nid, label)

        build(obj, -1, math.inf)
        return tree


def build_ultrametric(m: MetricSpace, *, shell_constant: float = 150.0) -> UltrametricTree:
    """Recursively cut m into an ultrametric tree labelled by diameters."""
    n = m.n
    if n < 1:
        raise MetricError("cannot embed an empty space")
    tree = UltrametricTree(n)
    stack: list[tuple[np.ndarray, int]] = [(np.arange(n, dtype=np.int64), -1)]
    while stack:
        idx, parent = stack.pop()
        if idx.size == 1:
            tree._add_node(0.0, parent, int(idx[0]), None, None)
            continue
        sub = induced_submetric(m, idx)
        delta = diameter(sub)
        u_loc = find_half_center(sub)
        cert = choose_cut_radius(sub, u_loc, epsilon_hat(sub, u_loc),
                                 shell_constant=shell_constant)
        x1_loc, x2_loc = partition_step(sub, u_loc, cert)
        cert.u = int(idx[u_loc])
        cert.z = idx[x1_loc]
        cert.zbar = idx[x2_loc]
        nid = tree._add_node(delta, parent, None, int(idx[u_loc]), cert)
        stack.append((idx[x2_loc], nid))
        stack.append((idx[x1_loc], nid))  # popped first: near side gets the next id
    return tree


def ultrametric_distance(t: UltrametricTree, x: int, y: int) -> float:
    return t.distance(x, y)
