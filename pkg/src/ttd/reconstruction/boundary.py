"""Boundary quantities recovered from the data alone."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import DataSet
from ..tolerances import DEFAULT, Tolerances


class EmptyDataError(ValueError):
    pass


class DegenerateDataError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def _check(ds: DataSet):
    if len(ds) == 0:
        raise EmptyDataError("dataset has no records")


def recover_boundary_distance(ds: DataSet, i: int, j: int) -> float:
    """Largest travel-time difference between receivers i and j over all sources.

    Both orderings are used since the distance is symmetric; the result never
    exceeds the true distance (up to forward-model error) and grows with the
    dataset.
    """
    _check(ds)
    col = ds.values[:, i] - ds.values[:, j]
    return float(max(col.max(), (-col).max()))


def boundary_distance_matrix(ds: DataSet, chunk: int = 256) -> np.ndarray:
    """All recovered receiver-to-receiver distances (cached on the dataset)."""
    _check(ds)
    if "bdist" not in ds.cache:
        V = ds.values
        out = np.full((ds.m, ds.m), -np.inf)
        for a in range(0, len(V), chunk):
            blk = V[a:a + chunk]
            np.maximum(out, (blk[:, :, None] - blk[:, None, :]).max(axis=0), out=out)
        ds.cache["bdist"] = np.maximum(out, out.T)
    return ds.cache["bdist"]


def _curve_order(atlas, k):
    idx = np.flatnonzero(atlas.curve == k)
    return idx[np.argsort(atlas.arclength[idx], kind="stable")]


def recover_boundary_metric(ds: DataSet) -> np.ndarray:
    """g(T, T) at each receiver from recovered distances to its two neighbours."""
    M = boundary_distance_matrix(ds)
    atlas = ds.atlas
    out = np.empty(ds.m)
    for k, L in enumerate(atlas.curve_lengths):
        idx = _curve_order(atlas, k)
        s = atlas.arclength[idx]
        nxt, prv = np.roll(idx, -1), np.roll(idx, 1)
        gap_n = np.mod(np.roll(s, -1) - s, L)
        gap_p = np.mod(s - np.roll(s, 1), L)
        dn, dp = M[idx, nxt], M[idx, prv]
        if np.any(dn <= 0) or np.any(dp <= 0):
            bad = idx[(dn <= 0) | (dp <= 0)][0]
            raise DegenerateDataError(f"neighbour distance of receiver {bad} recovered as zero")
        out[idx] = 0.5 * ((dn / gap_n) ** 2 + (dp / gap_p) ** 2)
    return out


@dataclass
class BoundaryFunction:
    values: np.ndarray      # f_p(z) per receiver
    closest: int            # receiver index of Z(p)
    sup: float
    on_boundary: bool


def boundary_defining_function(ds: DataSet, k: int, tol: Tolerances = DEFAULT) -> BoundaryFunction:
    """f_p(z) = d(z, Z(p)) - D_p(z, Z(p)) for record k, and the boundary flag.

    ``Z(p)`` is the receiver closest to the source.  The record must not be
    on the boundary cut locus.
    """
    from .cutlocus import record_label

    if record_label(ds, k, tol) == "on_cut":
        raise PreconditionError("record lies on the boundary cut locus; Z(p) is not unique")
    M = boundary_distance_matrix(ds)
    v = ds.values[k]
    z = int(np.argmin(v))
    f = M[:, z] - (v - v[z])
    sup = float(f.max())
    return BoundaryFunction(f, z, sup, sup <= tol.boundary * ds.h)


def depth_proxy(ds: DataSet, rows=None) -> np.ndarray:
    """Data-only estimate of each source's distance to the boundary.

    ``max_z f_p(z) / 2``: the supremum is twice the depth when the normal
    geodesic through the source reaches the far side as a minimizer.
    """
    M = boundary_distance_matrix(ds)
    rows = np.arange(len(ds)) if rows is None else np.asarray(rows)
    V = ds.values[rows]
    z = np.argmin(V, axis=1)
    f = M[:, z].T - (V - V[np.arange(len(rows)), z][:, None])
    return f.max(axis=1) / 2.0
