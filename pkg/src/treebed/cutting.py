"""Shell-based cut selection shared by the ultrametric and tree builders.

Both constructions repeatedly cut a cluster W at a radius r measured from a
center u, where r must live in an admissible shell S and avoid every "bad"
radius: one where some tolerance window around r holds too many points for
the per-scale budget. Concretely, r is bad when for some k >= 1 at least k
points w satisfy |coord(w) - r| < w_k, where

    w_k = lam * sqrt(E_k) / (shell_constant * big_c),
    E_k = min(2 k^2 / ((beta n)^2 eps_hat), 32 eps_hat).

The set of bad radii at level k is a union of open intervals obtained from
a sliding window over the sorted coordinates, so the good radii can be
computed exactly: subtract all bad zones from S and take the midpoint of
the longest surviving subinterval. The guarantee that S is never fully
deleted is inherited from the total-length accounting of the underlying
construction; an empty survivor set therefore raises CutSelectionError.

The ultrametric cut is the special case theta = 0, big_c = 1, beta = 1,
eps_lim = 1 with no case split; the tree decompose threads its scaled
constants through and adds the two-case split on which side of the cluster
is small (case 2 runs the same machinery on mirrored coordinates, cutting
inward from the outer boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CutSelectionError, InvariantError
from .metrics import MetricSpace, PseudoMetricView

__all__ = [
    "DeletedInterval",
    "CutCertificate",
    "shell_cut",
    "max_feasible_eps",
    "audit_cut_radius",
]

# Shell fractions of sqrt(eps_hat) * lam / big_c, shrunk by 1/25 on each
# side from the raw [1/4, 1/2) band so that deleted zones cannot cover S.
S_LO_FRAC = 1.0 / 4.0 + 1.0 / 25.0
S_HI_FRAC = 1.0 / 2.0 - 1.0 / 25.0

_REL_SLACK = 1e-9


@dataclass(frozen=True)
class DeletedInterval:
    """One removed radius interval with the witness that flagged it."""

    r: float  # witness radius (midpoint of the removed zone)
    eps: float  # property level E_k at which the zone is bad
    lo: float
    hi: float
    k: int  # number of points crowding the window


@dataclass
class CutCertificate:
    """Everything needed to re-audit one cut after the fact.

    ``z``/``zbar`` record the partition and ``split_pair_dists`` the
    space-distances of every separated pair, so budget verification is
    self-contained. Those arrays are kept in memory only; serialized traces
    carry just the scalar fields and the deletion list.
    """

    u: int
    eps_hat: float
    S_lo: float
    S_hi: float
    deleted: tuple[DeletedInterval, ...]
    r: float
    case: int  # 1 or 2; 0 marks the trivial single-point / degenerate cut
    theta: float
    alpha: float
    lam_hat: float
    beta: float
    n_reset: int
    eps_lim: float
    big_c: float
    shell_constant: float
    n_points: int
    z: np.ndarray | None = field(default=None, repr=False)
    zbar: np.ndarray | None = field(default=None, repr=False)
    split_pair_dists: np.ndarray | None = field(default=None, repr=False)
    z_count: int | None = None  # |Z| as recorded; survives when z itself doesn't

    def scalar_dict(self) -> dict:
        """JSON-friendly view without the bulky arrays."""
        return {
            "u": int(self.u),
            "eps_hat": self.eps_hat,
            "S_lo": self.S_lo,
            "S_hi": self.S_hi,
            "r": self.r,
            "case": self.case,
            "theta": self.theta,
            "alpha": self.alpha,
            "lam_hat": self.lam_hat,
            "beta": self.beta,
            "n_reset": self.n_reset,
            "eps_lim": self.eps_lim,
            "big_c": self.big_c,
            "shell_constant": self.shell_constant,
            "n_points": self.n_points,
            "z_size": self.z_count if self.z is None else int(self.z.size),
            "deleted": [
                {"r": d.r, "eps": d.eps, "lo": d.lo, "hi": d.hi, "k": d.k}
                for d in self.deleted
            ],
        }


def max_feasible_eps(count_at, n_points: int, beta: float, n_budget: int, eps_lim: float):
    """Largest eps in (0, eps_lim] with count_at(eps) >= eps * beta * n_budget.

    For any feasible eps with count k, eps <= min(k / (beta n), eps_lim) and
    that candidate is itself feasible (count_at is nondecreasing), so the
    supremum is attained on the candidate grid below. Returns None when no
    candidate is feasible (possible only for complement-side counts).
    """
    best = None
    denom = beta * n_budget
    for k in range(1, n_points + 1):
        cand = min(k / denom, eps_lim)
        if best is not None and cand <= best:
            continue
        if count_at(cand) >= cand * denom * (1.0 - _REL_SLACK):
            best = cand
        if cand >= eps_lim:
            break
    return best


def _level_width(k: int, eps_hat: float, lam: float, big_c: float, beta: float,
                 n_budget: int, shell_constant: float) -> tuple[float, float]:
    """(E_k, w_k) for the crowding level k."""
    e_level = min(2.0 * k * k / ((beta * n_budget) ** 2 * eps_hat), 32.0 * eps_hat)
    w = lam * math.sqrt(e_level) / (shell_constant * big_c)
    return e_level, w


def _level_cap(n_finite: int, eps_hat: float, beta: float, n_budget: int) -> int:
    """Largest crowding level worth scanning; E_k saturates beyond it."""
    if n_finite == 0 or eps_hat <= 0.0:
        return 0
    return min(n_finite, max(1, math.ceil(4.0 * beta * n_budget * eps_hat - 1e-12)))


def _bad_zones(coords_sorted: np.ndarray, eps_hat: float, lam: float, big_c: float,
               beta: float, n_budget: int, shell_constant: float):
    """Open intervals of bad radii, merged per level, as (lo, hi, k, E_k)."""
    m = coords_sorted.size
    zones: list[tuple[float, float, int, float]] = []
    for k in range(1, _level_cap(m, eps_hat, beta, n_budget) + 1):
        e_level, w = _level_width(k, eps_hat, lam, big_c, beta, n_budget, shell_constant)
        lo = coords_sorted[k - 1 :] - w
        hi = coords_sorted[: m - k + 1] + w
        mask = lo < hi
        if not mask.any():
            continue
        lo, hi = lo[mask], hi[mask]
        # Windows come out sorted by lo; merge overlapping runs.
        cur_lo, cur_hi = float(lo[0]), float(hi[0])
        for a, b in zip(lo[1:], hi[1:]):
            if a < cur_hi:
                cur_hi = max(cur_hi, float(b))
            else:
                zones.append((cur_lo, cur_hi, k, e_level))
                cur_lo, cur_hi = float(a), float(b)
        zones.append((cur_lo, cur_hi, k, e_level))
    return zones


def _pick_radius(s_lo: float, s_hi: float, zones):
    """Subtract the open zones from [s_lo, s_hi]; midpoint of the longest
    surviving subinterval (leftmost on ties). Returns (r, deleted)."""
    clipped = []
    for lo, hi, k, e_level in zones:
        a, b = max(lo, s_lo), min(hi, s_hi)
        if a < b:
            clipped.append((a, b, k, e_level))
    clipped.sort(key=lambda t: (t[0], t[1]))
    survivors: list[tuple[float, float]] = []
    cursor = s_lo
    for a, b, _, _ in clipped:
        if a > cursor:
            survivors.append((cursor, a))
        cursor = max(cursor, b)
    if cursor < s_hi:
        survivors.append((cursor, s_hi))
    deleted = tuple(
        DeletedInterval(r=0.5 * (a + b), eps=e, lo=a, hi=b, k=k) for a, b, k, e in clipped
    )
    if not survivors:
        return None, deleted
    best = max(survivors, key=lambda ab: ab[1] - ab[0])
    return 0.5 * (best[0] + best[1]), deleted


def audit_cut_radius(r: float, coords: np.ndarray, eps_hat: float, lam: float,
                     big_c: float, beta: float, n_budget: int,
                     shell_constant: float = 150.0) -> bool:
    """Re-check the crowding property for a chosen radius.

    True iff for every level k the open window of half-width w_k around r
    holds fewer than k points. Sufficient for the full property over all
    eps in (0, 32 eps_hat]: the violation threshold crosses the integer k
    exactly at E_k, and windows only widen with eps.
    """
    finite = coords[np.isfinite(coords)]
    for k in range(1, _level_cap(finite.size, eps_hat, beta, n_budget) + 1):
        _, w = _level_width(k, eps_hat, lam, big_c, beta, n_budget, shell_constant)
        if int(np.sum(np.abs(finite - r) < w)) >= k:
            return False
    return True


def _cross_dists(space, z_mask: np.ndarray) -> np.ndarray:
    """Sorted space-distances of every (Z, Z-bar) pair."""
    zi = np.nonzero(z_mask)[0]
    wi = np.nonzero(~z_mask)[0]
    if zi.size == 0 or wi.size == 0:
        return np.empty(0)
    if isinstance(space, MetricSpace):
        block = space.d[np.ix_(zi, wi)]
    elif space.kind == "identity":
        block = space.base[np.ix_(zi, wi)]
    else:
        h = space.potential
        hz, hw = h[zi], h[wi]
        with np.errstate(invalid="ignore"):
            block = np.abs(hz[:, None] - hw[None, :])
        block[~np.isfinite(hz), :] = np.inf
        block[:, ~np.isfinite(hw)] = np.inf
    return np.sort(block.ravel())


def shell_cut(space, u: int, *, lam: float, theta: float, big_c: float, beta: float,
              n_budget: int, eps_lim: float, shell_constant: float = 150.0,
              case_split: bool = True):
    """Cut ``space`` at a certified radius from ``u``.

    Returns (z, zbar, cert) with z/zbar ambient point ids (z the closed
    ball of the chosen radius). With case_split the small side of the
    cluster decides the cut direction; without it the cut always grows
    outward from u (the ultrametric setting, where u is a half-center).
    """
    pts = space.points
    n_w = pts.size
    tol = 1e-12 * lam
    alpha = math.sqrt(eps_lim) / big_c

    def make_cert(eps_hat, s_lo, s_hi, deleted, r, case, z_mask):
        return CutCertificate(
            u=int(u), eps_hat=eps_hat, S_lo=s_lo, S_hi=s_hi, deleted=deleted, r=r,
            case=case, theta=theta, alpha=alpha, lam_hat=lam, beta=beta,
            n_reset=n_budget, eps_lim=eps_lim, big_c=big_c,
            shell_constant=shell_constant, n_points=n_w,
            z=pts[z_mask], zbar=pts[~z_mask],
            split_pair_dists=_cross_dists(space, z_mask),
        )

    if n_w == 1:
        r = theta * lam
        z_mask = np.ones(1, dtype=bool)
        return pts.copy(), pts[:0], make_cert(0.0, r, r, (), r, 0, z_mask)

    dvec = space.dists_from(u)

    case = 1
    if case_split:
        inner = int(np.sum(dvec <= (theta + alpha / 2.0) * lam + tol))
        case = 1 if inner <= n_budget / 2.0 else 2

    if case == 1:
        coords_sorted = np.sort(dvec)

        def count_at(eps):
            x = (theta + math.sqrt(eps) / (4.0 * big_c)) * lam
            return int(np.searchsorted(coords_sorted, x + tol, side="right"))

        eps_hat = max_feasible_eps(count_at, n_w, beta, n_budget, eps_lim)
        if eps_hat is None:  # the center's own 0 always qualifies
            raise InvariantError("no feasible eps for an outward cut")
        scale = math.sqrt(eps_hat) / big_c * lam
        s_lo, s_hi = theta * lam + S_LO_FRAC * scale, theta * lam + S_HI_FRAC * scale
        finite = coords_sorted[np.isfinite(coords_sorted)]
        zones = _bad_zones(finite, eps_hat, lam, big_c, beta, n_budget, shell_constant)
        r, deleted = _pick_radius(s_lo, s_hi, zones)
        if r is None:
            raise CutSelectionError(
                "interval deletion emptied the admissible shell",
                certificate=make_cert(eps_hat, s_lo, s_hi, deleted, math.nan, case,
                                      dvec <= s_lo + tol),
            )
    else:
        mirror = (theta + alpha) * lam
        with np.errstate(invalid="ignore"):
            evec = mirror - dvec  # unreachable points map to -inf
        e_sorted = np.sort(evec)

        def count_at(eps):
            x = math.sqrt(eps) / (4.0 * big_c) * lam
            return int(np.searchsorted(e_sorted, x - tol, side="left"))

        eps_hat = max_feasible_eps(count_at, n_w, beta, n_budget, eps_lim)
        if eps_hat is None:
            # Degenerate: the complement is empty at every positive eps, so
            # cutting at the outer boundary separates nothing.
            r = mirror
            z_mask = dvec <= r + tol
            if not z_mask.all():  # pragma: no cover - contradicts infeasibility
                raise InvariantError("degenerate outer cut left points outside")
            return pts[z_mask], pts[~z_mask], make_cert(0.0, r, r, (), r, 2, z_mask)
        scale = math.sqrt(eps_hat) / big_c * lam
        se_lo, se_hi = S_LO_FRAC * scale, S_HI_FRAC * scale
        finite = e_sorted[np.isfinite(e_sorted)]
        r_e, deleted_e = _pick_radius(se_lo, se_hi, _bad_zones(
            finite, eps_hat, lam, big_c, beta, n_budget, shell_constant))
        if r_e is None:
            raise CutSelectionError(
                "interval deletion emptied the admissible shell (mirrored)",
                certificate=make_cert(eps_hat, mirror - se_hi, mirror - se_lo,
                                      tuple(DeletedInterval(mirror - d.r, d.eps,
                                                            mirror - d.hi, mirror - d.lo, d.k)
                                            for d in deleted_e),
                                      math.nan, case, dvec <= mirror + tol),
            )
        r = mirror - r_e
        s_lo, s_hi = mirror - se_hi, mirror - se_lo
        deleted = tuple(
            DeletedInterval(r=mirror - d.r, eps=d.eps, lo=mirror - d.hi,
                            hi=mirror - d.lo, k=d.k)
            for d in deleted_e
        )

    z_mask = dvec <= r + tol
    if not audit_cut_radius(r, dvec, eps_hat, lam, big_c, beta, n_budget, shell_constant):
        raise InvariantError(
            f"chosen radius {r} fails its own crowding audit"
        )  # pragma: no cover - _pick_radius avoids every zone by construction
    return pts[z_mask], pts[~z_mask], make_cert(eps_hat, s_lo, s_hi, deleted, r, case, z_mask)
