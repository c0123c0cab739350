"""Boundary and interior coordinate charts built from travel-time differences."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..dataset import DataSet
from ..tolerances import DEFAULT, Tolerances
from .boundary import boundary_distance_matrix, depth_proxy, _curve_order
from .cutlocus import classify_cut_locus, competing_minima
from .embedding import embedding_distances


class ChartError(ValueError):
    """No admissible chart with the requested anchors."""


def _spacing(atlas, curve):
    return atlas.curve_lengths[curve] / int(np.sum(atlas.curve == curve))


def _arc_gap(atlas, curve, s, t):
    L = atlas.curve_lengths[curve]
    d = np.mod(np.asarray(t) - s, L)
    return np.where(d > L / 2, d - L, d)


# boundary charts -----------------------------------------------------------


@dataclass
class BoundaryChartRecord:
    base: int
    aux: int
    ids: list
    E: np.ndarray            # E_{z0}(q) = f_q(z0)
    Z: np.ndarray            # arclength of the closest boundary point of q
    depth: np.ndarray        # data-only depth proxy of q
    jacobian: np.ndarray     # 2x2 estimate of d(E, Z)/d(t, s) at the base point
    accepted: bool = True
    diagnostic: str = ""

    @property
    def entry(self) -> float:
        """Top-left Jacobian entry, ``2 - dE/dt``; zero at normal incidence."""
        return float(self.jacobian[0, 0])


def build_boundary_chart(ds: DataSet, p: int, z0: int, tol: Tolerances = DEFAULT) -> BoundaryChartRecord:
    """Chart ``q -> (E_{z0}(q), Z(q))`` near the boundary receiver p.

    ``dE/dt`` is the slope of E against the depth proxy for sources whose
    closest receiver is p.  It equals ``1 + cos`` of the angle between the
    inward normal at p and the minimizer from p towards z0, so the reported
    entry ``2 - dE/dt`` vanishes exactly at normal incidence.  Raises
    ChartError when z0 is inadmissible.
    """
    atlas = ds.atlas
    h = ds.h
    M = boundary_distance_matrix(ds)
    V = ds.values
    labels = np.array(classify_cut_locus(ds, tol))
    curve = int(atlas.curve[p])
    sp = _spacing(atlas, curve)
    delta = tol.patch * sp

    rows, Zs, Zi = [], [], []
    for k in np.flatnonzero(labels == "off_cut"):
        m = min(competing_minima(atlas, V[k], tol.cut * h), key=lambda c: c.value)
        if m.curve == curve and abs(_arc_gap(atlas, curve, atlas.arclength[p], m.arclength)) <= delta:
            rows.append(k)
            Zs.append(m.arclength)
            Zi.append(int(np.argmin(V[k])))
    rows = np.asarray(rows, dtype=int)
    if len(rows) < 3:
        raise ChartError(f"too few off-cut sources near receiver {p}")
    Zs = np.asarray(Zs)
    Zi = np.asarray(Zi)

    # admissibility of z0
    for k in rows:
        f = V[k] - V[k].min()
        if f[z0] <= tol.tie * h:
            raise ChartError(f"receiver {z0} is a closest boundary point of a source in the patch")
    idx = _curve_order(atlas, curve)
    pos = int(np.flatnonzero(idx == p)[0])
    lft, rgt = idx[(pos - 1) % len(idx)], idx[(pos + 1) % len(idx)]
    curv = abs(M[z0, lft] - 2 * M[z0, p] + M[z0, rgt]) / sp ** 2
    if curv > 1.0 / (tol.tie * h):
        raise ChartError(f"recovered distance to receiver {z0} is not smooth near receiver {p} "
                         f"(second difference {curv:.3g})")

    E = M[z0, Zi] - (V[rows, z0] - V[rows, Zi])
    t = depth_proxy(ds, rows)
    # E and t both carry the offset of the recovered distance d(z0, p), so
    # the slope is fitted with an intercept
    shallow = t <= delta / 2
    near = (Zi == p) & shallow
    if near.sum() < 3:
        near = (np.abs(_arc_gap(atlas, curve, atlas.arclength[p], Zs)) <= sp) & shallow
    if near.sum() < 3 or np.ptp(t[near]) <= 0:
        raise ChartError(f"too few sources along the normal at receiver {p}")
    slope = float(np.polyfit(t[near], E[near], 1)[0])
    # tangential direction: Z moves with unit rate along s, E changes by the
    # slope of E against Z at small depth
    sel = t <= 2 * delta
    dEds = float(np.polyfit(Zs[sel] - atlas.arclength[p], E[sel], 1)[0]) if sel.sum() >= 3 else 0.0
    jac = np.array([[2.0 - slope, dEds], [0.0, 1.0]])
    rec = BoundaryChartRecord(p, z0, [ds.ids[k] for k in rows], E, Zs, t, jac)
    if not tol.jac < rec.entry < 2.0 - tol.jac:
        raise ChartError(f"normal incidence at receiver {p} from receiver {z0}: "
                         f"Jacobian entry {rec.entry:.3f} outside ({tol.jac}, {2 - tol.jac})")
    return rec


# interior charts -----------------------------------------------------------


@dataclass
class InteriorChartRecord:
    anchor: int
    closest: int
    receivers: tuple
    ids: list
    H: np.ndarray
    singular_values: np.ndarray
    condition: float
    rank: int
    tried: list = field(default_factory=list)

    def min_separation(self) -> float:
        from scipy.spatial.distance import pdist
        return float(pdist(self.H).min()) if len(self.H) > 1 else np.inf


def jacobian_proxy(ds: DataSet, k: int, receivers, closest: int, neighbours: int = 12) -> np.ndarray:
    """Least-squares Jacobian of ``q -> (D_q(z_i, z_p))_i`` in local embedding coordinates.

    Local coordinates are the top principal components of the centred
    records nearest to record k in the embedding.
    """
    V = ds.values
    e = V - V.mean(axis=1, keepdims=True)
    dist = embedding_distances(V[k], V)[0]
    nb = np.argsort(dist, kind="stable")[:neighbours]
    X = e[nb] - e[k]
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    coords = X @ vt[:2].T
    rec = list(receivers)
    H = V[nb][:, rec] - V[nb][:, [closest]]
    dH = H - (V[k, rec] - V[k, closest])
    A, *_ = np.linalg.lstsq(coords, dH, rcond=None)
    return A.T


def build_interior_chart(ds: DataSet, anchor: int, candidates, tol: Tolerances = DEFAULT,
                         n: int = 2) -> InteriorChartRecord:
    """Chart ``H(q) = (D_q(z_i, z_p))_i`` around an off-cut record.

    Picks the n-tuple of candidate receivers whose Jacobian proxy is best
    conditioned; fails when none reaches rank n with condition number at most
    ``cond_max``.
    """
    if classify_cut_locus(ds, tol)[anchor] == "on_cut":
        raise ChartError("anchor record lies on the boundary cut locus")
    V = ds.values
    cands = sorted(set(int(c) for c in candidates))
    if cands and not (0 <= cands[0] and cands[-1] < ds.m):
        raise ValueError(f"candidate receivers must lie in [0, {ds.m})")
    zp = int(np.argmin(V[anchor]))
    best = None
    tried = []
    for tup in combinations(cands, n):
        if zp in tup:
            continue
        J = jacobian_proxy(ds, anchor, tup, zp)
        s = np.linalg.svd(J, compute_uv=False)
        rank = int(np.sum(s > s[0] * 1e-8)) if s[0] > 0 else 0
        cond = float(s[0] / s[-1]) if s[-1] > 0 else np.inf
        tried.append((tup, cond))
        if rank == n and (best is None or cond < best[1]):
            best = (tup, cond, s, rank)
    if best is None or best[1] > tol.cond_max:
        raise ChartError("no candidate tuple gives a well-conditioned interior chart: "
                         + ", ".join(f"{t}: {c:.3g}" for t, c in tried))
    tup, cond, s, rank = best
    delta = tol.patch * float(np.mean(ds.atlas.spacing()))
    dist = embedding_distances(V[anchor], V)[0]
    patch = np.flatnonzero(dist <= delta)
    H = V[patch][:, list(tup)] - V[patch][:, [zp]]
    return InteriorChartRecord(anchor, zp, tup, [ds.ids[k] for k in patch], H, s, cond, rank, tried)
