"""Metric spaces, restricted views, balls, radii, and half-centers.

Two kinds of spaces flow through the algorithms:

* ``MetricSpace``: a dense symmetric matrix of pairwise distances over
  points 0..n-1.
* ``PseudoMetricView``: a point subset equipped either with the rows of a
  base matrix (identity view) or with a scalar potential per point whose
  absolute differences define the distance (cone views). Both satisfy the
  pseudo-metric axioms; cone views may have distinct points at distance 0.

Every query function here accepts either kind. Views address points by
their AMBIENT ids (the ids of the space they were carved from); a plain
MetricSpace is its own ambient space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MetricError

__all__ = [
    "MetricSpace",
    "PseudoMetricView",
    "ball",
    "radius_from",
    "diameter",
    "find_half_center",
    "cone_metric",
    "induced_submetric",
]


class MetricSpace:
    """Finite metric space backed by a dense distance matrix."""

    __slots__ = ("d", "n", "points")

    def __init__(self, d: np.ndarray, *, validate: bool = True):
        d = np.asarray(d, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise MetricError(f"distance matrix must be square, got shape {d.shape}")
        self.d = d
        self.n = d.shape[0]
        self.points = np.arange(self.n, dtype=np.int64)
        if validate:
            self._validate_basic()

    def _validate_basic(self) -> None:
        d = self.d
        if not np.all(np.isfinite(d)):
            raise MetricError("distance matrix contains non-finite entries")
        if np.any(np.diagonal(d) != 0.0):
            raise MetricError("distance matrix has a nonzero diagonal entry")
        if not np.array_equal(d, d.T):
            raise MetricError("distance matrix is not symmetric")
        if np.any(d < 0.0):
            raise MetricError("distance matrix has a negative entry")
        off = d + np.eye(self.n)
        if np.any(off <= 0.0):
            i, j = np.argwhere(off <= 0.0)[0]
            raise MetricError(f"distinct points {i} and {j} are at distance 0")

    def check_triangle(self, *, rtol: float = 1e-9) -> None:
        """Full n^3 triangle-inequality check; for tests and debug runs."""
        d = self.d
        for k in range(self.n):
            via = d[:, [k]] + d[[k], :]
            if np.any(d > via * (1.0 + rtol) + 1e-15):
                i, j = np.argwhere(d > via * (1.0 + rtol) + 1e-15)[0]
                raise MetricError(
                    f"triangle inequality fails: d({i},{j}) > d({i},{k}) + d({k},{j})"
                )

    def dist(self, x: int, y: int) -> float:
        return float(self.d[x, y])

    def dists_from(self, x: int) -> np.ndarray:
        """Distances from x to every point, aligned with ``self.points``."""
        return self.d[x]

    def local_index(self, x: int) -> int:
        return int(x)


@dataclass(frozen=True)
class PseudoMetricView:
    """Point subset with either inherited or potential-derived distances.

    ``kind`` is "identity" or "cone". Identity views read rows of ``base``
    (a matrix aligned with ``points``). Cone views carry a potential h per
    point and measure ell(u, v) = |h(u) - h(v)|; the classic cone metric
    around apex x and tip y is the special case h(w) = d(x,w) - d(y,w).
    Cone views built during star partitions measure the tip leg inside the
    piece being carved, which only shrinks h and keeps the same algebra.

    Points with non-finite potential are unreachable: their distance to
    every other point is +inf (they fall outside every ball).
    """

    points: np.ndarray
    kind: str
    base: np.ndarray | None = None
    potential: np.ndarray | None = None
    apex: int | None = None
    tip: int | None = None
    _pos: dict = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_pos", {int(p): i for i, p in enumerate(pts)})
        if self.kind == "identity":
            if self.base is None or self.base.shape != (len(pts), len(pts)):
                raise MetricError("identity view needs a base matrix aligned with its points")
        elif self.kind == "cone":
            if self.potential is None or self.potential.shape != (len(pts),):
                raise MetricError("cone view needs one potential value per point")
        else:
            raise MetricError(f"unknown view kind {self.kind!r}")

    @property
    def n(self) -> int:
        return len(self.points)

    def local_index(self, x: int) -> int:
        try:
            return self._pos[int(x)]
        except KeyError:
            raise MetricError(f"point {x} is not in this view") from None

    def dists_from(self, x: int) -> np.ndarray:
        i = self.local_index(x)
        if self.kind == "identity":
            return self.base[i]
        h = self.potential
        if not np.isfinite(h[i]):
            out = np.full(self.n, np.inf)
            out[i] = 0.0
            return out
        out = np.abs(h - h[i])
        out[~np.isfinite(h)] = np.inf
        out[i] = 0.0
        return out

    def dist(self, x: int, y: int) -> float:
        return float(self.dists_from(x)[self.local_index(y)])


def _space_points(space) -> np.ndarray:
    return space.points


def ball(space, center: int, r: float, strict: bool = False, *, tol: float = 0.0) -> np.ndarray:
    """Ambient ids of points within distance r of center.

    Closed by default ({z : d <= r + tol}); strict=True uses d < r - tol.
    ``tol`` is the absolute comparison slack the algorithms thread through;
    the public default is exact.
    """
    if r < 0:
        raise MetricError(f"ball radius must be nonnegative, got {r}")
    dv = space.dists_from(center)
    if strict:
        mask = dv < r - tol
    else:
        mask = dv <= r + tol
    return _space_points(space)[mask]


def radius_from(space, center: int) -> float:
    """max_y d(center, y) over the space."""
    if space.n == 0:
        raise MetricError("radius of an empty space")
    return float(np.max(space.dists_from(center)))


def diameter(space) -> float:
    if space.n == 0:
        raise MetricError("diameter of an empty space")
    if isinstance(space, MetricSpace):
        return float(np.max(space.d))
    if space.kind == "identity":
        return float(np.max(space.base))
    h = space.potential
    finite = h[np.isfinite(h)]
    if finite.size < space.n:
        return float("inf") if space.n > 1 else 0.0
    return float(np.max(finite) - np.min(finite))


def find_half_center(m) -> int:
    """A point whose OPEN diam/2 ball holds at most half of the points.

    Existence: take a diametral pair (a, b); the open diam/2 balls around a
    and b are disjoint (a point in both would put a and b closer than diam),
    so one of them has <= n/2 points. Scanning ids in order and returning
    the first qualifying point makes the choice deterministic and returns
    the smallest qualifying id.
    """
    n = m.n
    if n == 1:
        return int(_space_points(m)[0])
    half = diameter(m) / 2.0
    for p in _space_points(m):
        if ball(m, int(p), half, strict=True).size <= n / 2:
            return int(p)
    raise MetricError("no half-center found; input is not a metric")  # pragma: no cover


def cone_metric(m: MetricSpace, Y, x: int, y: int) -> PseudoMetricView:
    """The cone pseudo-metric over Y with apex x and tip y.

    ell(u, v) = |(d(x,u) - d(y,u)) - (d(x,v) - d(y,v))|, computed as the
    absolute difference of the potential h(w) = d(x,w) - d(y,w). Balls
    around the tip collapse to {v in Y : d(x,y) + d(y,v) - d(x,v) <= r}.
    """
    pts = np.asarray(sorted(int(p) for p in Y), dtype=np.int64)
    if int(y) not in set(pts.tolist()):
        raise MetricError(f"tip {y} is not a member of the cone's point set")
    h = m.d[x][pts] - m.d[y][pts]
    return PseudoMetricView(points=pts, kind="cone", potential=h, apex=int(x), tip=int(y))


def induced_submetric(m: MetricSpace, S) -> MetricSpace:
    """Restriction of m to S (ambient distances), points reindexed 0..|S|-1
    in the order of S."""
    idx = np.asarray(list(S), dtype=np.int64)
    if idx.size == 0:
        raise MetricError("cannot restrict a metric to an empty point set")
    return MetricSpace(m.d[np.ix_(idx, idx)], validate=False)
