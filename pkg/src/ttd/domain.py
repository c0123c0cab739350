"""Planar parameter domains and boundary receiver atlases.

A domain is a compact region of the plane bounded by closed curves (outer
curve first, then holes).  Every curve is parameterized by Euclidean
arclength and oriented so that its left normal points into the region.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

INTERIOR = 1
BOUNDARY = 0
EXTERIOR = -1


class GeometryError(ValueError):
    """Invalid geometric input, e.g. a self-intersecting boundary."""


class DomainError(ValueError):
    """A point lies outside the domain where an interior point is required."""


def _segments_cross(a, b, c, d):
    """Proper-intersection test between segment sets [a, b] and [c, d] (broadcast)."""

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def _polyline_is_simple(vertices: np.ndarray) -> bool:
    """True when the closed polyline has no crossing non-adjacent edges."""
    n = len(vertices)
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    i, j = np.triu_indices(n, k=2)
    keep = ~((i == 0) & (j == n - 1))
    i, j = i[keep], j[keep]
    # chunk to bound memory on dense spline samplings
    for start in range(0, len(i), 200_000):
        sl = slice(start, start + 200_000)
        if np.any(_segments_cross(a[i[sl]], b[i[sl]], a[j[sl]], b[j[sl]])):
            return False
    return True


def _point_segment_distance(points, a, b):
    """Distances from points (P, 2) to segments a->b (S, 2); returns (P, S)."""
    ab = b - a
    denom = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("psk,sk->ps", ap, ab) / denom, 0.0, 1.0)
    closest = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(points[:, None, :] - closest, axis=-1)


class BoundaryCurve:
    """Closed arclength-parameterized curve; subclasses supply the geometry."""

    length: float

    def point(self, s) -> np.ndarray:
        raise NotImplementedError

    def tangent(self, s) -> np.ndarray:
        raise NotImplementedError

    def normal(self, s) -> np.ndarray:
        """Left normal of the (unit) tangent; points into the domain."""
        t = self.tangent(s)
        return np.stack([-t[..., 1], t[..., 0]], axis=-1)

    def samples(self, pitch: float) -> np.ndarray:
        n = max(8, int(np.ceil(self.length / pitch)))
        return np.linspace(0.0, self.length, n, endpoint=False)

    def polyline(self, pitch: float) -> np.ndarray:
        return self.point(self.samples(pitch))

    def unsigned_distance(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def project(self, points: np.ndarray) -> np.ndarray:
        """Arclength of the closest curve point for each point."""
        raise NotImplementedError

    def winding_inside(self, points: np.ndarray) -> np.ndarray:
        """Even-odd containment in the region enclosed by this curve."""
        raise NotImplementedError


class CircleCurve(BoundaryCurve):
    def __init__(self, center, radius: float, ccw: bool = True):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.ccw = bool(ccw)
        self.length = 2.0 * np.pi * self.radius

    def _angle(self, s):
        a = np.asarray(s, dtype=float) / self.radius
        return a if self.ccw else -a

    def point(self, s):
        a = self._angle(s)
        return self.center + self.radius * np.stack([np.cos(a), np.sin(a)], axis=-1)

    def tangent(self, s):
        a = self._angle(s)
        sign = 1.0 if self.ccw else -1.0
        return sign * np.stack([-np.sin(a), np.cos(a)], axis=-1)

    def unsigned_distance(self, points):
        r = np.linalg.norm(np.asarray(points) - self.center, axis=-1)
        return np.abs(r - self.radius)

    def project(self, points):
        d = np.asarray(points, dtype=float) - self.center
        a = np.arctan2(d[..., 1], d[..., 0])
        if not self.ccw:
            a = -a
        return np.mod(a * self.radius, self.length)

    def winding_inside(self, points):
        r = np.linalg.norm(np.asarray(points) - self.center, axis=-1)
        return r < self.radius


class PolylineCurve(BoundaryCurve):
    """Closed polygon; arclength runs along the edges."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("polygon needs at least three 2-D vertices")
        if np.allclose(v[0], v[-1]):
            v = v[:-1]
        self.vertices = v
        self.edges_a = v
        self.edges_b = np.roll(v, -1, axis=0)
        seg = np.linalg.norm(self.edges_b - self.edges_a, axis=1)
        if np.any(seg <= 0):
            raise GeometryError("polygon has repeated vertices")
        self.seg_len = seg
        self.cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.length = float(self.cum[-1])

    def _locate(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        k = np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.seg_len) - 1)
        return k, (s - self.cum[k]) / self.seg_len[k]

    def point(self, s):
        k, u = self._locate(s)
        return self.edges_a[k] + u[..., None] * (self.edges_b[k] - self.edges_a[k])

    def tangent(self, s):
        k, _ = self._locate(s)
        d = self.edges_b[k] - self.edges_a[k]
        return d / self.seg_len[k][..., None]

    def unsigned_distance(self, points):
        pts = np.atleast_2d(points)
        out = np.empty(len(pts))
        for start in range(0, len(pts), 4096):
            chunk = pts[start:start + 4096]
            out[start:start + 4096] = _point_segment_distance(chunk, self.edges_a, self.edges_b).min(axis=1)
        return out.reshape(np.shape(points)[:-1])

    def project(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.empty(len(pts))
        ab = self.edges_b - self.edges_a
        denom = np.einsum("ij,ij->i", ab, ab)
        for start in range(0, len(pts), 4096):
            chunk = pts[start:start + 4096]
            ap = chunk[:, None, :] - self.edges_a[None]
            t = np.clip(np.einsum("psk,sk->ps", ap, ab) / denom, 0.0, 1.0)
            closest = self.edges_a[None] + t[..., None] * ab[None]
            dist = np.linalg.norm(chunk[:, None, :] - closest, axis=-1)
            k = dist.argmin(axis=1)
            rows = np.arange(len(chunk))
            out[start:start + 4096] = self.cum[k] + t[rows, k] * self.seg_len[k]
        return np.mod(out, self.length).reshape(np.shape(points)[:-1])

    def winding_inside(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x, y = pts[:, 0:1], pts[:, 1:2]
        ax, ay = self.edges_a[:, 0], self.edges_a[:, 1]
        bx, by = self.edges_b[:, 0], self.edges_b[:, 1]
        cond = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
        crossings = np.sum(cond & (x < xint), axis=1)
        return (crossings % 2 == 1).reshape(np.shape(points)[:-1])


class SplineCurve(PolylineCurve):
    """Periodic cubic spline through control points, re-tabulated by arclength.

    Geometry queries (distance, containment) use a dense polyline whose
    chord error is far below the mesh pitch.
    """

    def __init__(self, control_points, table_pitch: float):
        cp = np.asarray(control_points, dtype=float)
        if np.allclose(cp[0], cp[-1]):
            cp = cp[:-1]
        if len(cp) < 4:
            raise GeometryError("spline needs at least four control points")
        closed = np.vstack([cp, cp[:1]])
        chord = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(closed, axis=0), axis=1))])
        self._spline = CubicSpline(chord, closed, bc_type="periodic")
        u = np.linspace(0.0, chord[-1], max(2000, int(20 * chord[-1] / table_pitch)), endpoint=False)
        pts = self._spline(u)
        super().__init__(pts)
        self._u_of_s = (np.concatenate([self.cum[:-1], [self.length]]),
                        np.concatenate([u, [chord[-1]]]))

    def _u(self, s):
        s = np.mod(np.asarray(s, dtype=float), self.length)
        return np.interp(s, *self._u_of_s)

    def point(self, s):
        return self._spline(self._u(s))

    def tangent(self, s):
        d = self._spline(self._u(s), 1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def reversed(self) -> "PolylineCurve":
        return PolylineCurve(self.vertices[::-1])


def _flip_polyline(curve: PolylineCurve) -> PolylineCurve:
    return PolylineCurve(curve.vertices[::-1])


@dataclass(frozen=True, eq=False)
class ParamDomain:
    """Compact planar region with piecewise-smooth boundary.

    ``depth`` is the signed Euclidean distance to the boundary, positive in
    the interior.
    """

    curves: tuple
    h: float
    spec: dict = field(default_factory=dict)

    @property
    def key(self) -> str:
        return json.dumps({"spec": self.spec, "h": self.h}, sort_keys=True)

    @property
    def boundary_band(self) -> float:
        return self.h / 100.0

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        pts = self.curves[0].polyline(self.h)
        return (pts[:, 0].min(), pts[:, 1].min(), pts[:, 0].max(), pts[:, 1].max())

    @property
    def total_length(self) -> float:
        return float(sum(c.length for c in self.curves))

    def depth(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        kind = self.spec.get("type")
        if kind == "disk":
            return self.spec["R"] - np.linalg.norm(pts, axis=-1)
        if kind == "annulus":
            r = np.linalg.norm(pts, axis=-1)
            return np.minimum(r - self.spec["r_in"], self.spec["r_out"] - r)
        dist = np.min([c.unsigned_distance(pts) for c in self.curves], axis=0)
        inside = self.curves[0].winding_inside(pts)
        for hole in self.curves[1:]:
            inside &= ~hole.winding_inside(pts)
        return np.where(inside, dist, -dist)

    def inside_test(self, points) -> np.ndarray:
        d = self.depth(points)
        band = self.boundary_band
        return np.where(d > band, INTERIOR, np.where(d < -band, EXTERIOR, BOUNDARY))

    def contains(self, points) -> np.ndarray:
        return self.depth(points) >= -self.boundary_band

    def closest_boundary(self, points):
        """(curve index, arclength) of the closest boundary point."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        dists = np.stack([c.unsigned_distance(pts) for c in self.curves])
        idx = dists.argmin(axis=0)
        s = np.empty(len(pts))
        for k, c in enumerate(self.curves):
            m = idx == k
            if np.any(m):
                s[m] = c.project(pts[m])
        return idx, s

    def boundary_point(self, curve: int, s) -> np.ndarray:
        return self.curves[curve].point(s)

    def inward_normal(self, curve: int, s) -> np.ndarray:
        return self.curves[curve].normal(s)

    def tangent(self, curve: int, s) -> np.ndarray:
        return self.curves[curve].tangent(s)

    def normal_at(self, points) -> np.ndarray:
        """Inward normal at the closest boundary point of each point."""
        idx, s = self.closest_boundary(points)
        out = np.empty((len(idx), 2))
        for k, c in enumerate(self.curves):
            m = idx == k
            if np.any(m):
                out[m] = c.normal(s[m])
        return out


def _orient_inward(domain_curves, make_flipped, h):
    """Flip curves whose left normal does not point into the region."""
    fixed = []
    tmp = ParamDomain(tuple(domain_curves), h, {"type": "generic"})
    for c in domain_curves:
        s = c.samples(max(c.length / 64, h))[:16]
        probe = c.point(s) + 0.25 * h * c.normal(s)
        votes = np.mean(tmp.depth(probe) > 0)
        fixed.append(c if votes >= 0.5 else make_flipped(c))
    return fixed


def build_domain(spec: dict, h: float) -> ParamDomain:
    """Construct a domain from a description dict.

    Supported types: ``disk`` (R), ``annulus`` (r_in, r_out), ``polygon``
    (vertices) and ``spline`` (control_points).
    """
    if not (h > 0):
        raise ValueError(f"mesh pitch must be positive, got {h}")
    kind = spec.get("type")
    if kind == "disk":
        R = float(spec.get("R", 1.0))
        if R <= 0:
            raise GeometryError("disk radius must be positive")
        return ParamDomain((CircleCurve((0.0, 0.0), R, ccw=True),), float(h), {"type": "disk", "R": R})
    if kind == "annulus":
        r_in, r_out = float(spec["r_in"]), float(spec["r_out"])
        if not 0 < r_in < r_out:
            raise GeometryError("annulus needs 0 < r_in < r_out")
        curves = (CircleCurve((0.0, 0.0), r_out, ccw=True), CircleCurve((0.0, 0.0), r_in, ccw=False))
        return ParamDomain(curves, float(h), {"type": "annulus", "r_in": r_in, "r_out": r_out})
    if kind == "polygon":
        verts = np.asarray(spec["vertices"], dtype=float)
        curve = PolylineCurve(verts)
        if not _polyline_is_simple(curve.vertices):
            raise GeometryError("polygon boundary is self-intersecting")
        curves = _orient_inward([curve], _flip_polyline, h)
        return ParamDomain(tuple(curves), float(h), {"type": "polygon", "vertices": curve.vertices.tolist()})
    if kind == "spline":
        cps = np.asarray(spec["control_points"], dtype=float)
        curve = SplineCurve(cps, h)
        if not _polyline_is_simple(curve.vertices[:: max(1, len(curve.vertices) // 4000)]):
            raise GeometryError("spline boundary is self-intersecting")
        curves = _orient_inward([curve], lambda c: SplineCurve(cps[::-1], h), h)
        return ParamDomain(tuple(curves), float(h), {"type": "spline", "control_points": cps.tolist()})
    raise GeometryError(f"unknown domain type {kind!r}")


@dataclass(frozen=True, eq=False)
class BoundaryAtlas:
    """Ordered boundary receivers as (curve index, arclength) pairs."""

    curve: np.ndarray
    arclength: np.ndarray
    curve_lengths: tuple
    positions: np.ndarray | None = None

    @property
    def m(self) -> int:
        return len(self.curve)

    def spacing(self) -> np.ndarray:
        """Arclength gap to the next receiver on the same curve."""
        out = np.empty(self.m)
        for k, L in enumerate(self.curve_lengths):
            idx = np.flatnonzero(self.curve == k)
            s = self.arclength[idx]
            out[idx] = np.mod(np.roll(s, -1) - s, L)
            if len(idx) == 1:
                out[idx] = L
        return out

    def neighbors(self, i: int, k: int = 1) -> tuple[int, int]:
        """Indices of the k-th previous and next receiver on the same curve."""
        idx = np.flatnonzero(self.curve == self.curve[i])
        pos = int(np.flatnonzero(idx == i)[0])
        return int(idx[(pos - k) % len(idx)]), int(idx[(pos + k) % len(idx)])

    def arc_gap(self, i: int, j: int) -> float:
        """Signed arclength from receiver i to j along their common curve (shortest way)."""
        if self.curve[i] != self.curve[j]:
            raise ValueError("receivers on different curves")
        L = self.curve_lengths[self.curve[i]]
        d = np.mod(self.arclength[j] - self.arclength[i], L)
        return d - L if d > L / 2 else d

    def to_header(self) -> dict:
        return {
            "curve_lengths": [float(x) for x in self.curve_lengths],
            "curve": [int(c) for c in self.curve],
            "arclength": [float(s) for s in self.arclength],
        }

    @classmethod
    def from_header(cls, header: dict) -> "BoundaryAtlas":
        return cls(np.asarray(header["curve"], dtype=int), np.asarray(header["arclength"], dtype=float),
                   tuple(header["curve_lengths"]))


def _validate_atlas(atlas: BoundaryAtlas) -> None:
    if np.any(np.bincount(atlas.curve, minlength=len(atlas.curve_lengths)) < 8):
        raise GeometryError("every boundary curve needs at least 8 receivers")
    keys = np.round(np.stack([atlas.curve, atlas.arclength], axis=1), 12)
    if len(np.unique(keys, axis=0)) != atlas.m:
        raise GeometryError("receivers must be distinct")


def make_atlas(domain: ParamDomain, count: int, offsets=None) -> BoundaryAtlas:
    """Uniformly spaced receivers, distributed over curves in proportion to length.

    ``offsets`` shifts the first receiver of each curve by an arclength.
    """
    lengths = np.array([c.length for c in domain.curves])
    k = len(lengths)
    if count < 8 * k:
        raise GeometryError(f"need at least {8 * k} receivers for {k} curves")
    share = np.maximum(8, np.floor(count * lengths / lengths.sum()).astype(int))
    while share.sum() > count:
        share[np.argmax(share)] -= 1
    while share.sum() < count:
        share[np.argmax(lengths / share)] += 1
    offsets = np.zeros(k) if offsets is None else np.asarray(offsets, dtype=float)
    curve, arc = [], []
    for ci, (n, L) in enumerate(zip(share, lengths)):
        s = np.mod(offsets[ci] + np.arange(n) * L / n, L)
        order = np.argsort(s)
        curve.append(np.full(n, ci))
        arc.append(s[order])
    curve = np.concatenate(curve)
    arc = np.concatenate(arc)
    atlas = BoundaryAtlas(curve, arc, tuple(float(x) for x in lengths),
                          _positions(domain, curve, arc))
    _validate_atlas(atlas)
    return atlas


def _positions(domain, curve, arc):
    pos = np.empty((len(curve), 2))
    for k, c in enumerate(domain.curves):
        m = curve == k
        if np.any(m):
            pos[m] = c.point(arc[m])
    return pos


def atlas_from_points(domain: ParamDomain, points) -> tuple[BoundaryAtlas, np.ndarray]:
    """Atlas from boundary points, sorted by (curve, arclength).

    Returns the atlas and ``order`` with ``atlas receiver j == points[order[j]]``.
    """
    pts = np.asarray(points, dtype=float)
    idx, s = domain.closest_boundary(pts)
    order = np.lexsort((s, idx))
    curve, arc = idx[order], s[order]
    atlas = BoundaryAtlas(curve, arc, tuple(float(c.length) for c in domain.curves),
                          _positions(domain, curve, arc))
    _validate_atlas(atlas)
    return atlas, order


def attach_positions(domain: ParamDomain, atlas: BoundaryAtlas) -> BoundaryAtlas:
    """Same atlas with planar receiver positions filled in from the domain."""
    return BoundaryAtlas(atlas.curve, atlas.arclength, atlas.curve_lengths,
                         _positions(domain, atlas.curve, atlas.arclength))
