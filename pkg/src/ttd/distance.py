"""Intrinsic distances on a planar domain with a Riemannian metric.

The domain is covered by a square lattice of pitch ``h`` plus samples of the
boundary curves.  Lattice nodes are joined by a 16-neighbour stencil and
boundary samples are joined to every node within ``2.3 h`` that they can see.
Edge weights are metric lengths of straight segments.

Shortest paths are computed by Dijkstra with any-angle relaxation: a node may
be reached by a straight segment from its predecessor's anchor whenever that
segment stays inside the domain and is shorter.  Straight segments are only
trusted up to a length where the metric's variation keeps their excess over
the true geodesic below ``h / 2``; for constant metrics they are unbounded.
The plain stencil Dijkstra (``straighten=False``) is kept as an oracle.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from . import _kernels as K
from .domain import BoundaryAtlas, DomainError, ParamDomain
from .metric import MetricField

STENCIL = ((1, 0), (0, 1), (1, 1), (1, -1), (1, 2), (2, 1), (2, -1), (1, -2))
LINK_RADIUS = 2.3
TIE_TOL_FACTOR = 3.0

_threads = max(1, int(os.environ.get("TTD_THREADS", "1") or 1))


def set_threads(n: int) -> None:
    """Worker threads used for batches of independent shortest-path runs."""
    global _threads
    _threads = max(1, int(n))


def get_threads() -> int:
    return _threads


@dataclass
class DistanceField:
    """Distances from one source to every graph node.

    ``nodes`` has the graph nodes followed by the source itself; ``parent``
    holds the anchor of each node's path (-1 when unreached).
    """

    source: np.ndarray
    nodes: np.ndarray
    values: np.ndarray
    parent: np.ndarray
    h: float
    engine: "GraphEngine"
    straighten: bool = True

    def at(self, points) -> np.ndarray:
        """Distance at arbitrary domain points."""
        return self.engine.evaluate(self, points)

    def path_to(self, node: int) -> np.ndarray:
        """Anchor chain from ``node`` back to the source, as coordinates."""
        idx = K.trace_path(self.nodes, self.parent, int(node), len(self.nodes))
        return self.nodes[idx]


class GraphEngine:
    """Lattice graph and compiled shortest-path kernels for one (metric, domain, h)."""

    def __init__(self, field: MetricField, domain: ParamDomain, h: float | None = None):
        self.field = field
        self.domain = domain
        self.h = float(domain.h if h is None else h)
        self.eps = self.h / 20.0
        self._build_grids()
        self._build_graph()
        self._receiver_cache: dict = {}

    # construction --------------------------------------------------------

    def _build_grids(self):
        h = self.h
        xmin, ymin, xmax, ymax = self.domain.bbox
        pad = 4 * h
        self.x0 = xmin - pad
        self.y0 = ymin - pad
        nx = int(np.ceil((xmax + pad - self.x0) / h)) + 1
        ny = int(np.ceil((ymax + pad - self.y0) / h)) + 1
        gx = self.x0 + h * np.arange(nx)
        gy = self.y0 + h * np.arange(ny)
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        pts = np.stack([X, Y], axis=-1)
        self.sd = np.ascontiguousarray(self.domain.depth(pts.reshape(-1, 2)).reshape(nx, ny))
        self.euclid = self.field.is_euclidean
        if self.euclid:
            one = np.ones((2, 2))
            self.g11, self.g12, self.g22 = one, np.zeros((2, 2)), one
            self.lam_lo = 1.0
            self.lmax = np.inf
        else:
            g = self.field.g(pts)
            self.g11 = np.ascontiguousarray(g[..., 0, 0])
            self.g12 = np.ascontiguousarray(g[..., 0, 1])
            self.g22 = np.ascontiguousarray(g[..., 1, 1])
            near = self.sd > -2 * h
            lam = np.linalg.eigvalsh(g[near])
            if lam[:, 0].min() <= 0:
                raise ValueError("metric is not positive definite on the domain")
            self.lam_lo = float(np.sqrt(lam[:, 0].min())) * (1 - 1e-9)
            grads = [np.gradient(c, h) for c in (self.g11, self.g12, self.g22)]
            gnorm = np.sqrt(sum(d[0] ** 2 + d[1] ** 2 for d in grads))
            k = float(np.max(gnorm[near] / (2 * lam[:, 0])))
            delta = h / 2.0
            self.lmax = np.inf if k < 1e-12 else float((48 * delta ** 2 / k ** 2) ** 0.25)
        self._grid_pts = pts
        self._grid_shape = (nx, ny)

    def _costs(self, a, b):
        return K.cost_batch(np.ascontiguousarray(a), np.ascontiguousarray(b), self.euclid,
                            self.g11, self.g12, self.g22, self.x0, self.y0, self.h)

    def _los(self, a, b):
        return K.los_batch(np.ascontiguousarray(a), np.ascontiguousarray(b), self.sd,
                           self.x0, self.y0, self.h, self.eps)

    def _build_graph(self):
        h = self.h
        nx, ny = self._grid_shape
        inside = self.sd > h / 10.0
        gid = np.full((nx, ny), -1, dtype=np.int64)
        ii, jj = np.nonzero(inside)
        gid[ii, jj] = np.arange(len(ii))
        lattice = self._grid_pts[ii, jj]
        bnd = [c.point(c.samples(h)) for c in self.domain.curves]
        bcurve = np.concatenate([np.full(len(b), k) for k, b in enumerate(bnd)])
        bpts = np.concatenate(bnd)
        nl, nb = len(lattice), len(bpts)
        self.n_lattice = nl
        self.coords = np.ascontiguousarray(np.vstack([lattice, bpts]))
        self.boundary_nodes = np.arange(nl, nl + nb)
        self.boundary_curve = bcurve

        src, dst = [], []
        for di, dj in STENCIL:
            a = gid[max(0, -di):nx - max(0, di), max(0, -dj):ny - max(0, dj)]
            b = gid[max(0, di):nx - max(0, -di), max(0, dj):ny - max(0, -dj)]
            ok = (a >= 0) & (b >= 0)
            src.append(a[ok])
            dst.append(b[ok])
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        # lattice edges may clip a reflex corner; probe their interior points
        pa, pb = self.coords[src], self.coords[dst]
        keep = np.ones(len(src), dtype=bool)
        for t in (0.25, 0.5, 0.75):
            keep &= self.domain.depth(pa + t * (pb - pa)) >= -self.eps
        src, dst = src[keep], dst[keep]

        # boundary links: consecutive samples plus everything visible nearby
        offs = 0
        bs, bd = [], []
        for b in bnd:
            k = np.arange(len(b))
            bs.append(nl + offs + k)
            bd.append(nl + offs + (k + 1) % len(b))
            offs += len(b)
        tree = cKDTree(self.coords)
        self.tree = tree
        near = tree.query_ball_point(bpts, LINK_RADIUS * h)
        for k, lst in enumerate(near):
            u = nl + k
            lst = np.asarray([v for v in lst if v != u], dtype=np.int64)
            bs.append(np.full(len(lst), u))
            bd.append(lst)
        bs = np.concatenate(bs)
        bd = np.concatenate(bd)
        vis = self._los(self.coords[bs], self.coords[bd])
        src = np.concatenate([src, bs[vis]])
        dst = np.concatenate([dst, bd[vis]])

        lo, hi = np.minimum(src, dst), np.maximum(src, dst)
        key = np.unique(lo * (nl + nb) + hi)
        lo, hi = key // (nl + nb), key % (nl + nb)
        w = self._costs(self.coords[lo], self.coords[hi])
        n = nl + nb
        mat = sparse.coo_matrix((np.concatenate([w, w]), (np.concatenate([lo, hi]), np.concatenate([hi, lo]))),
                                shape=(n, n)).tocsr()
        mat.sort_indices()
        self.graph = mat
        self.indptr = mat.indptr.astype(np.int64)
        self.indices = mat.indices.astype(np.int64)
        self.weights = mat.data.astype(np.float64)
        self.n_nodes = n

    @cached_property
    def boundary_field(self) -> DistanceField:
        """Distance to the boundary (multi-source from every boundary sample)."""
        seeds = self.boundary_nodes
        return self._run(np.full(2, np.nan), seeds, np.zeros(len(seeds)), seeds.copy(), True)

    # solving -------------------------------------------------------------

    def check_inside(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        bad = self.domain.depth(pts) < -self.domain.boundary_band
        if np.any(bad):
            p = pts[np.flatnonzero(bad)[0]]
            raise DomainError(f"point ({p[0]:.6g}, {p[1]:.6g}) lies outside the domain")
        return pts

    def _run(self, source, seed_idx, seed_dist, seed_parent, straighten, targets=None):
        coords = np.vstack([self.coords, np.asarray(source, float).reshape(1, 2)])
        tg = np.zeros(0, dtype=np.int64) if targets is None else np.asarray(targets, dtype=np.int64)
        dist, parent = K.theta_star(coords, self.indptr, self.indices, self.weights,
                                    np.asarray(seed_idx, np.int64), np.asarray(seed_dist, float),
                                    np.asarray(seed_parent, np.int64), straighten, self.lmax, self.euclid,
                                    self.g11, self.g12, self.g22, self.sd, self.x0, self.y0, self.h,
                                    self.eps, self.lam_lo, tg)
        return DistanceField(np.asarray(source, float).reshape(2), coords, dist, parent, self.h, self,
                             straighten)

    def candidates(self, points):
        """CSR lists of graph nodes within the link radius of each point."""
        pts = np.atleast_2d(np.asarray(points, float))
        lists = self.tree.query_ball_point(pts, LINK_RADIUS * self.h)
        ptr = np.zeros(len(pts) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(x) for x in lists])
        idx = np.fromiter((v for x in lists for v in x), dtype=np.int64, count=int(ptr[-1]))
        if np.any(ptr[1:] == ptr[:-1]):
            raise DomainError("query point has no graph node nearby")
        return ptr, idx

    def field_from(self, p, straighten: bool = True, targets=None) -> DistanceField:
        p = self.check_inside(p)[0]
        ptr, idx = self.candidates(p)
        seed = idx[ptr[0]:ptr[1]]
        return self._run(p, seed, -np.ones(len(seed)), np.full(len(seed), self.n_nodes), straighten, targets)

    def evaluate(self, df: DistanceField, points, cand=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, float))
        ptr, idx = self.candidates(pts) if cand is None else cand
        return K.evaluate_points(df.nodes, df.values, df.parent, np.ascontiguousarray(pts), ptr, idx,
                                 df.straighten, self.lmax, self.euclid, self.g11, self.g12, self.g22,
                                 self.sd, self.x0, self.y0, self.h, self.eps)

    def distance(self, p, q, straighten: bool = True) -> float:
        p = self.check_inside(p)[0]
        q = self.check_inside(q)[0]
        # fixed orientation makes the result exactly symmetric
        if tuple(q) < tuple(p):
            p, q = q, p
        cand = self.candidates(q)
        df = self.field_from(p, straighten, targets=cand[1])
        return float(self.evaluate(df, q, cand)[0])

    def segment_cost(self, a, b) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        return self._costs(a, b)

    def receiver_fields(self, positions) -> list:
        """Distance fields rooted at each receiver position (cached)."""
        pos = np.ascontiguousarray(np.asarray(positions, float))
        key = pos.tobytes()
        if key not in self._receiver_cache:
            self._receiver_cache[key] = self.fields_from(pos)
        return self._receiver_cache[key]

    def fields_from(self, points) -> list:
        pts = np.atleast_2d(np.asarray(points, float))
        if _threads > 1 and len(pts) > 1:
            with ThreadPoolExecutor(_threads) as pool:
                return list(pool.map(self.field_from, pts))
        return [self.field_from(p) for p in pts]

    def receiver_distances(self, positions, points) -> np.ndarray:
        """Matrix of d(point_k, receiver_i), shape (len(points), m)."""
        pts = self.check_inside(points)
        fields = self.receiver_fields(positions)
        cand = self.candidates(pts)
        return np.stack([self.evaluate(f, pts, cand) for f in fields], axis=1)


_ENGINES: dict = {}


def get_engine(field: MetricField, domain: ParamDomain, h: float | None = None) -> GraphEngine:
    key = (domain.key, field.key, float(domain.h if h is None else h))
    eng = _ENGINES.get(key)
    if eng is None:
        eng = _ENGINES[key] = GraphEngine(field, domain, h)
    return eng


def distance(field: MetricField, domain: ParamDomain, p, q, straighten: bool = True) -> float:
    """Intrinsic distance between two domain points; exactly symmetric."""
    return get_engine(field, domain).distance(p, q, straighten)


def distance_field(field: MetricField, domain: ParamDomain, source, straighten: bool = True) -> DistanceField:
    return get_engine(field, domain).field_from(source, straighten)


def closest_boundary_set(field: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, p,
                         tie_tol: float | None = None):
    """Receivers within ``tie_tol`` (default 3h) of the minimal distance from p.

    Returns (receiver indices, their distances).
    """
    eng = get_engine(field, domain)
    tol = TIE_TOL_FACTOR * eng.h if tie_tol is None else tie_tol
    pos = _positions(domain, atlas)
    d = eng.evaluate(eng.field_from(p), pos)
    idx = np.flatnonzero(d <= d.min() + tol)
    return idx, d[idx]


def _positions(domain, atlas):
    if atlas.positions is not None:
        return atlas.positions
    from .domain import attach_positions
    return attach_positions(domain, atlas).positions


def boundary_distance(field: MetricField, domain: ParamDomain, points) -> np.ndarray:
    """Distance from points to the boundary."""
    eng = get_engine(field, domain)
    return eng.evaluate(eng.boundary_field, eng.check_inside(points))


def boundary_cut_distance(field: MetricField, domain: ParamDomain, curve: int, s: float,
                          tol: float | None = None) -> float:
    """Cut distance along the inward normal geodesic from the boundary point (curve, s).

    The largest t for which the normal geodesic still realizes the distance
    to the boundary, up to a slack of one pitch for the graph error.
    """
    from .geodesic import rk4_step, shoot_geodesic, unit_speed

    eng = get_engine(field, domain)
    h = eng.h
    slack = h if tol is None else tol
    x = domain.boundary_point(curve, s).reshape(2)
    n = domain.inward_normal(curve, s).reshape(2)
    g = field.g(x)
    nu = np.linalg.solve(g, n)
    nu = unit_speed(field, x, nu)
    path = shoot_geodesic(field, domain, x, nu)
    if path.terminated_by == "breakdown":
        raise ArithmeticError("normal geodesic broke down")
    pts = path.points
    inside = domain.depth(pts) >= -domain.boundary_band
    db = np.full(len(pts), -np.inf)
    db[inside] = boundary_distance(field, domain, pts[inside])
    ok = db >= path.t - slack
    bad = np.flatnonzero(~ok)
    if len(bad) == 0:
        return float(path.t[-1])
    k = int(bad[0])
    if k == 0:
        return 0.0
    lo, hi = 0.0, path.t[k] - path.t[k - 1]
    x0, v0 = pts[k - 1], path.velocities[k - 1]
    while hi - lo > h / 100.0:
        mid = 0.5 * (lo + hi)
        xm, _ = rk4_step(field, x0[None], v0[None], mid)
        if boundary_distance(field, domain, xm)[0] >= path.t[k - 1] + mid - slack:
            lo = mid
        else:
            hi = mid
    return float(path.t[k - 1] + lo)
