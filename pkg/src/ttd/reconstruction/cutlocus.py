"""Closest boundary points and the boundary cut locus from travel-time differences.

For a fixed reference receiver w, ``z -> D_p(z, w)`` differs from
``z -> d(p, z)`` by a constant, so its minimizers are the closest boundary
points of the hidden source.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import DataSet, TTDRecord
from ..tolerances import DEFAULT, Tolerances
from .boundary import _curve_order


def closest_boundary_from_data(r: TTDRecord, w: int, tie_tol: float) -> np.ndarray:
    """Receivers minimizing ``D_p(., w)`` up to ``tie_tol``."""
    f = r.column(w)
    return np.flatnonzero(f <= f.min() + tie_tol)


@dataclass(frozen=True)
class Minimum:
    curve: int
    arclength: float   # refined location
    value: float       # refined value of v at the minimum
    receiver: int      # nearest receiver


def _vertex(s, y):
    """Vertex of the parabola through three points (location, value)."""
    (s0, s1, s2), (y0, y1, y2) = s, y
    d1 = (y1 - y0) / (s1 - s0)
    d2 = (y2 - y1) / (s2 - s1)
    a = (d2 - d1) / (s2 - s0)
    if a <= 0:
        return s1, y1
    b = d1 - a * (s0 + s1)
    sv = float(np.clip(-b / (2 * a), s0, s2))
    return sv, float(y0 + d1 * (sv - s0) + a * (sv - s0) * (sv - s1))


def local_minima(atlas, v) -> list:
    """Local minima of a receiver function along each curve, parabola-refined."""
    out = []
    for k, L in enumerate(atlas.curve_lengths):
        idx = _curve_order(atlas, k)
        n = len(idx)
        s = atlas.arclength[idx]
        y = v[idx]
        prev, nxt = np.roll(y, 1), np.roll(y, -1)
        # a plateau counts once, at its first receiver
        is_min = (y < prev) & (y <= nxt)
        if not np.any(is_min) and n:
            is_min = y == y.min()
        for j in np.flatnonzero(is_min):
            sl = s[j] - np.mod(s[j] - s[(j - 1) % n], L)
            sr = s[j] + np.mod(s[(j + 1) % n] - s[j], L)
            sv, yv = _vertex((sl, s[j], sr), (y[(j - 1) % n], y[j], y[(j + 1) % n]))
            out.append(Minimum(k, float(np.mod(sv, L)), min(yv, float(y[j])), int(idx[j])))
    return out


def _spacing(atlas, k):
    return atlas.curve_lengths[k] / max(1, int(np.sum(atlas.curve == k)))


def competing_minima(atlas, v, cut_tol: float) -> list:
    """Local minima within ``cut_tol`` of the global one."""
    mins = local_minima(atlas, v)
    best = min(m.value for m in mins)
    return [m for m in mins if m.value <= best + cut_tol]


def is_on_cut(atlas, cands) -> bool:
    for a in range(len(cands)):
        for b in range(a + 1, len(cands)):
            p, q = cands[a], cands[b]
            if p.curve != q.curve:
                return True
            L = atlas.curve_lengths[p.curve]
            gap = abs(p.arclength - q.arclength)
            gap = min(gap, L - gap)
            if gap > 2.0 * _spacing(atlas, p.curve):
                return True
    return False


def record_label(ds: DataSet, k: int, tol: Tolerances = DEFAULT) -> str:
    cands = competing_minima(ds.atlas, ds.values[k], tol.cut * ds.h)
    return "on_cut" if is_on_cut(ds.atlas, cands) else "off_cut"


def classify_cut_locus(ds: DataSet, tol: Tolerances = DEFAULT) -> list:
    """``on_cut`` / ``off_cut`` per record (cached on the dataset)."""
    key = ("cut", tol.cut)
    if key not in ds.cache:
        ds.cache[key] = [record_label(ds, k, tol) for k in range(len(ds))]
    return ds.cache[key]
