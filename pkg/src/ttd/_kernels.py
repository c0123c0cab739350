"""Compiled inner loops for graph distances (numba)."""

import heapq

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def interp(grid, x0, y0, h, x, y, outside):
    """Bilinear interpolation on a regular grid; ``outside`` beyond its extent."""
    nx, ny = grid.shape
    fx = (x - x0) / h
    fy = (y - y0) / h
    i = int(np.floor(fx))
    j = int(np.floor(fy))
    if i < 0 or j < 0 or i >= nx - 1 or j >= ny - 1:
        return outside
    tx = fx - i
    ty = fy - j
    return ((1 - tx) * (1 - ty) * grid[i, j] + tx * (1 - ty) * grid[i + 1, j]
            + (1 - tx) * ty * grid[i, j + 1] + tx * ty * grid[i + 1, j + 1])


@njit(cache=True, nogil=True)
def seg_cost(ax, ay, bx, by, euclid, g11, g12, g22, x0, y0, h):
    dx = bx - ax
    dy = by - ay
    L = np.sqrt(dx * dx + dy * dy)
    if euclid or L == 0.0:
        return L
    n = int(L / (2.0 * h)) + 2
    acc = 0.0
    for k in range(n):
        t = (k + 0.5) / n
        x = ax + t * dx
        y = ay + t * dy
        a = interp(g11, x0, y0, h, x, y, np.nan)
        b = interp(g12, x0, y0, h, x, y, np.nan)
        c = interp(g22, x0, y0, h, x, y, np.nan)
        q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
        acc += np.sqrt(max(q, 0.0))
    return acc / n


@njit(cache=True, nogil=True)
def line_of_sight(ax, ay, bx, by, sd, x0, y0, h, eps):
    """Segment stays in the region {depth >= -eps} (sphere tracing on depth)."""
    dx = bx - ax
    dy = by - ay
    L = np.sqrt(dx * dx + dy * dy)
    if L == 0.0:
        return interp(sd, x0, y0, h, ax, ay, -1.0) >= -eps
    minstep = h / 8.0
    t = 0.0
    while True:
        x = ax + dx * (t / L)
        y = ay + dy * (t / L)
        s = interp(sd, x0, y0, h, x, y, -1.0)
        if s < -eps:
            return False
        if t >= L:
            return True
        step = s + eps
        if step < minstep:
            step = minstep
        t = t + step
        if t > L:
            t = L


@njit(cache=True, nogil=True)
def theta_star(coords, indptr, indices, weights, seed_idx, seed_dist, seed_parent,
               straighten, lmax, euclid, g11, g12, g22, sd, x0, y0, h, eps, lam_lo, targets):
    """Dijkstra with any-angle relaxation through the parent's anchor.

    ``coords`` has one row per graph node plus a trailing virtual source row.
    A seed with parent ``n_nodes`` hangs off the virtual source; its cost is
    recomputed here when ``seed_dist`` is negative.  The search stops early
    once every node in ``targets`` is settled (empty: run to completion).
    """
    n = indptr.shape[0] - 1
    vs = n
    dist = np.full(n + 1, np.inf)
    parent = np.full(n + 1, -1, dtype=np.int64)
    closed = np.zeros(n + 1, dtype=np.bool_)
    dist[vs] = 0.0
    is_target = np.zeros(n + 1, dtype=np.bool_)
    remaining = 0
    for k in range(targets.shape[0]):
        if not is_target[targets[k]]:
            is_target[targets[k]] = True
            remaining += 1
    heap = [(0.0, np.int64(0))]
    heap.pop()
    for k in range(seed_idx.shape[0]):
        s = seed_idx[k]
        d = seed_dist[k]
        p = seed_parent[k]
        if d < 0.0:
            if not line_of_sight(coords[p, 0], coords[p, 1], coords[s, 0], coords[s, 1], sd, x0, y0, h, eps):
                continue
            d = seg_cost(coords[p, 0], coords[p, 1], coords[s, 0], coords[s, 1], euclid, g11, g12, g22, x0, y0, h)
        if d < dist[s]:
            dist[s] = d
            parent[s] = p
            heapq.heappush(heap, (d, np.int64(s)))
    while len(heap) > 0:
        du, u = heapq.heappop(heap)
        if closed[u] or du > dist[u]:
            continue
        closed[u] = True
        if is_target[u]:
            remaining -= 1
            if remaining == 0:
                break
        a = parent[u]
        ax = coords[a, 0]
        ay = coords[a, 1]
        da = dist[a]
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if closed[v]:
                continue
            best = du + weights[e]
            bp = u
            if straighten and a != u and a >= 0:
                vx = coords[v, 0]
                vy = coords[v, 1]
                L = np.sqrt((vx - ax) ** 2 + (vy - ay) ** 2)
                target = min(best, dist[v])
                if L <= lmax and da + L * lam_lo < target:
                    c2 = seg_cost(ax, ay, vx, vy, euclid, g11, g12, g22, x0, y0, h)
                    if da + c2 < target and line_of_sight(ax, ay, vx, vy, sd, x0, y0, h, eps):
                        best = da + c2
                        bp = a
            if best < dist[v]:
                dist[v] = best
                parent[v] = bp
                heapq.heappush(heap, (best, np.int64(v)))
    return dist, parent


@njit(cache=True, nogil=True)
def evaluate_points(coords, dist, parent, qpts, cand_ptr, cand_idx, straighten, lmax, euclid,
                    g11, g12, g22, sd, x0, y0, h, eps):
    """Distance at off-graph points via nearby nodes and their anchors."""
    nq = qpts.shape[0]
    out = np.full(nq, np.inf)
    for q in range(nq):
        qx = qpts[q, 0]
        qy = qpts[q, 1]
        best = np.inf
        for k in range(cand_ptr[q], cand_ptr[q + 1]):
            n = cand_idx[k]
            if not np.isfinite(dist[n]):
                continue
            nx_ = coords[n, 0]
            ny_ = coords[n, 1]
            if line_of_sight(nx_, ny_, qx, qy, sd, x0, y0, h, eps):
                c = dist[n] + seg_cost(nx_, ny_, qx, qy, euclid, g11, g12, g22, x0, y0, h)
                if c < best:
                    best = c
            a = parent[n]
            if straighten and a >= 0 and a != n:
                ax = coords[a, 0]
                ay = coords[a, 1]
                L = np.sqrt((qx - ax) ** 2 + (qy - ay) ** 2)
                if L <= lmax:
                    c2 = dist[a] + seg_cost(ax, ay, qx, qy, euclid, g11, g12, g22, x0, y0, h)
                    if c2 < best and line_of_sight(ax, ay, qx, qy, sd, x0, y0, h, eps):
                        best = c2
        out[q] = best
    return out


@njit(cache=True, nogil=True)
def trace_path(coords, parent, start, limit):
    """Anchor chain from a node back to its source (node indices)."""
    out = np.empty(limit, dtype=np.int64)
    k = 0
    u = start
    while u >= 0 and k < limit:
        out[k] = u
        k += 1
        p = parent[u]
        if p == u:
            break
        u = p
    return out[:k]


@njit(cache=True, nogil=True)
def los_batch(a, b, sd, x0, y0, h, eps):
    out = np.empty(a.shape[0], dtype=np.bool_)
    for k in range(a.shape[0]):
        out[k] = line_of_sight(a[k, 0], a[k, 1], b[k, 0], b[k, 1], sd, x0, y0, h, eps)
    return out


@njit(cache=True, nogil=True)
def cost_batch(a, b, euclid, g11, g12, g22, x0, y0, h):
    out = np.empty(a.shape[0])
    for k in range(a.shape[0]):
        out[k] = seg_cost(a[k, 0], a[k, 1], b[k, 0], b[k, 1], euclid, g11, g12, g22, x0, y0, h)
    return out
