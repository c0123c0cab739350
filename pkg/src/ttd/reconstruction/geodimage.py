"""Recovery of geodesics from a boundary point as sets of anonymized sources.

A source p lies on the geodesic leaving receiver z with inward direction v
when the direction from z towards p, i.e. minus the gradient of
``d(p, .)`` at z, equals v.  The tangential part of that gradient is the
derivative of ``z' -> D_p(z', w)`` along the boundary; the normal part
follows from the eikonal identity.

Two additions make the recovered set usable at finite resolution:

* a lateral gate ``rho * |v_p - v| <= lateral_tol`` where ``rho`` is a
  data-only estimate of ``d(p, z)``, since an angular tolerance alone admits
  a wedge whose width grows with distance;
* for sources within a few receiver spacings of z, the gradient comes from
  fitting ``sigma |x - z'| + c`` to the nearby receivers (the metric is taken
  as locally isotropic with unknown scale ``sigma``), because finite
  differences across receivers are too coarse there.  The median fitted
  scale then normalizes the finite-difference gradients of farther sources.

The default lateral tolerance is ``2h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..dataset import DataSet
from ..domain import attach_positions, build_domain
from ..tolerances import DEFAULT, Tolerances
from .boundary import _curve_order, boundary_distance_matrix, recover_boundary_metric

NEAR_SPACINGS = 8


@dataclass
class GeodesicImage:
    receiver: int
    a: float
    ids: list                 # accepted sources ordered by distance from the receiver
    distances: np.ndarray     # data-only d(p, z) of accepted sources
    grazing: bool = False
    inconsistent: list = field(default_factory=list)


def _boundary_frame(ds: DataSet):
    domain = build_domain(ds.domain, ds.h)
    atlas = attach_positions(domain, ds.atlas)
    T = np.empty((ds.m, 2))
    N = np.empty((ds.m, 2))
    for k, c in enumerate(domain.curves):
        m = atlas.curve == k
        T[m] = c.tangent(atlas.arclength[m])
        N[m] = c.normal(atlas.arclength[m])
    return atlas.positions, T, N


def tangential_gradients(ds: DataSet, z: int) -> np.ndarray:
    """Central-difference derivative of ``d(p, .)`` along the boundary at z, per record."""
    atlas = ds.atlas
    idx = _curve_order(atlas, int(atlas.curve[z]))
    pos = int(np.flatnonzero(idx == z)[0])
    lft, rgt = idx[(pos - 1) % len(idx)], idx[(pos + 1) % len(idx)]
    L = atlas.curve_lengths[atlas.curve[z]]
    span = np.mod(atlas.arclength[rgt] - atlas.arclength[lft], L)
    return (ds.values[:, rgt] - ds.values[:, lft]) / span


def distance_to_receiver(ds: DataSet, z: int) -> np.ndarray:
    """Data-only ``d(p, z)``: half the largest ``d(z, w) + D_p(z, w)`` over w."""
    M = boundary_distance_matrix(ds)
    V = ds.values
    return np.max(M[z][None, :] + V[:, [z]] - V, axis=1) / 2.0


def _fit_direction(pts, vals, z_pos, guesses):
    """Fit ``sigma |x - z'| + c`` to receiver values; returns (unit direction from z, sigma)."""
    def resid(u):
        return u[3] * np.linalg.norm(u[:2] - pts, axis=1) + u[2] - vals

    best = None
    for x0 in guesses:
        c0 = float(np.mean(vals - np.linalg.norm(x0 - pts, axis=1)))
        sol = least_squares(resid, np.r_[x0, c0, 1.0], method="lm", xtol=1e-14, ftol=1e-14)
        if best is None or sol.cost < best.cost:
            best = sol
    d = best.x[:2] - z_pos
    n = np.linalg.norm(d)
    return (d / n if n > 0 else None), float(best.x[3])


def recover_geodesic_image(ds: DataSet, z: int, a: float, inward: bool = True, tol: Tolerances = DEFAULT,
                           lateral_tol: float | None = None) -> GeodesicImage:
    """Sources on the geodesic from receiver z with unit inward direction v.

    ``a`` is the tangential component of v in the metric-unit boundary frame
    (tangent along increasing arclength).  The normal component is fixed by
    ``|v| = 1``.  Grazing directions (``|a| >= 1 - grad_tol``) and outward
    directions have no transversal arriving minimizers and return an empty,
    flagged result.
    """
    lateral = 2 * ds.h if lateral_tol is None else lateral_tol
    if abs(a) > 1 + 1e-12:
        raise ValueError("tangential component must satisfy |a| <= 1")
    if not inward or abs(a) >= 1 - tol.grad:
        return GeodesicImage(z, a, [], np.empty(0), grazing=True)
    b = np.sqrt(1 - a * a)
    grad_s = tangential_gradients(ds, z)
    rho = distance_to_receiver(ds, z)
    pos, T, N = _boundary_frame(ds)
    atlas = ds.atlas
    idx = _curve_order(atlas, int(atlas.curve[z]))
    at = int(np.flatnonzero(idx == z)[0])
    win = idx[[(at + j) % len(idx) for j in range(-3, 4)]]
    spacing = atlas.curve_lengths[atlas.curve[z]] / len(idx)

    # both are lower bounds of the boundary scale |T|_g at z
    sigma = max(float(np.sqrt(recover_boundary_metric(ds)[z])), float(np.abs(grad_s).max()))
    near = np.flatnonzero((rho > 0) & (rho < NEAR_SPACINGS * spacing))
    fits = {}
    for k in near:
        guesses = [pos[z] + rho[k] * N[z]]
        ak = float(np.clip(-grad_s[k] / sigma, -1, 1))
        guesses.append(pos[z] + rho[k] * (ak * T[z] + np.sqrt(1 - ak * ak) * N[z]))
        fits[k] = _fit_direction(pos[win], ds.values[k, win], pos[z], guesses)
    if fits:
        # the fitted local scale is sharper than the lower bounds
        sigma = float(np.median([sg for _, sg in fits.values()]))

    ap = -grad_s / sigma
    bad = np.abs(ap) > 1 + tol.grad
    ap = np.clip(ap, -1, 1)
    bp = np.sqrt(1 - ap ** 2)
    for k, (d, _) in fits.items():
        if d is not None and d @ N[z] > 0:
            ap[k], bp[k] = d @ T[z], d @ N[z]
            bad[k] = False
    inconsistent = [ds.ids[k] for k in np.flatnonzero(bad)]

    err = np.hypot(ap - a, bp - b)
    ok = ~bad & (err <= tol.grad) & (rho * err <= lateral) & (rho > 0)
    sel = np.flatnonzero(ok)
    sel = sel[np.argsort(rho[sel], kind="stable")]
    return GeodesicImage(z, a, [ds.ids[k] for k in sel], rho[sel], False, inconsistent)
