"""Geodesic shooting and exit times.

Geodesics are integrated with classical RK4 at a fixed step, batched over
many initial conditions.  The speed is renormalized to one every
``RENORM_EVERY`` steps.  The first boundary crossing is located by bisection
on the RK4 sub-step from the last interior state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .domain import DomainError, ParamDomain
from .metric import MetricField

ANGLE_TOL = 1e-3
RENORM_EVERY = 10
_BISECT_TOL = 1e-12


@dataclass
class GeodesicPath:
    t: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    step: float
    terminated_by: str  # "exit" | "tmax" | "breakdown"
    exit_time: float = np.inf
    tangential: bool = False
    crossing_angle: float = np.nan

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    @property
    def length(self) -> float:
        return float(self.t[-1])


class ExitTime(NamedTuple):
    time: float
    tangential: bool
    crossing_angle: float


def _accel(field: MetricField, x, v):
    gam = field.christoffel(x)
    return -np.einsum("...kij,...i,...j->...k", gam, v, v)


def rk4_step(field: MetricField, x, v, dt):
    """One RK4 step of the geodesic ODE; ``dt`` may be an array."""
    dt = np.asarray(dt, dtype=float)[..., None] if np.ndim(dt) else dt
    a1 = _accel(field, x, v)
    x2, v2 = x + 0.5 * dt * v, v + 0.5 * dt * a1
    a2 = _accel(field, x2, v2)
    x3, v3 = x + 0.5 * dt * v2, v + 0.5 * dt * a2
    a3 = _accel(field, x3, v3)
    x4, v4 = x + dt * v3, v + dt * a3
    a4 = _accel(field, x4, v4)
    xn = x + dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
    vn = v + dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    return xn, vn


def unit_speed(field: MetricField, x, v) -> np.ndarray:
    return np.asarray(v, float) / field.norm(x, v)[..., None]


def flow(field: MetricField, x, v, T: float, step: float, renormalize: bool = False):
    """Integrate the geodesic flow to time T ignoring the boundary.

    Returns (t, X, V) with X, V of shape (nsteps+1, batch, 2).
    """
    x = np.atleast_2d(np.asarray(x, float))
    v = np.atleast_2d(np.asarray(v, float))
    n = max(1, int(np.ceil(T / step - 1e-9)))
    dt = T / n
    xs, vs = [x], [v]
    for k in range(1, n + 1):
        x, v = rk4_step(field, x, v, dt)
        if renormalize and k % RENORM_EVERY == 0:
            v = unit_speed(field, x, v)
        xs.append(x)
        vs.append(v)
    return np.arange(n + 1) * dt, np.stack(xs), np.stack(vs)


def crossing_angle(field: MetricField, domain: ParamDomain, x, v) -> np.ndarray:
    """Metric angle between v and the boundary tangent at the closest boundary point."""
    x = np.atleast_2d(x)
    v = np.atleast_2d(v)
    n = domain.normal_at(x)
    ginv = np.linalg.inv(field.g(x))
    nnorm = np.sqrt(np.einsum("ni,nij,nj->n", n, ginv, n))
    s = np.abs(np.einsum("ni,ni->n", n, v)) / (nnorm * field.norm(x, v))
    return np.arcsin(np.clip(s, 0.0, 1.0))


def _default_step(domain: ParamDomain) -> float:
    return domain.h / 2.0


def _default_tmax(domain: ParamDomain) -> float:
    x0, y0, x1, y1 = domain.bbox
    return 8.0 * float(np.hypot(x1 - x0, y1 - y0))


def _integrate(field, domain, X, V, tmax, step, record):
    """Batched shooting.

    Returns per-ray (exit time, status, exit x, exit v, samples, min depth),
    where the min depth runs over the integration nodes after the start,
    leaving out the last node before the exit.
    """
    X = np.array(X, dtype=float, ndmin=2)
    V = np.array(V, dtype=float, ndmin=2)
    nb = len(X)
    times = np.full(nb, np.inf)
    status = np.array(["tmax"] * nb, dtype=object)
    xe = X.copy()
    ve = V.copy()
    samples = [[(0.0, X[i].copy(), V[i].copy())] for i in range(nb)] if record else None
    mind = np.full(nb, np.inf)
    lastd = np.full(nb, np.inf)

    depth0 = domain.depth(X)
    if np.any(depth0 < -domain.boundary_band):
        raise DomainError("geodesic start point lies outside the domain")
    # on the boundary pointing outward: the ray leaves at once.  Tangent starts
    # are integrated; the bisection decides between grazing out and staying in.
    on_bd = depth0 <= domain.boundary_band
    inward = np.einsum("ni,ni->n", domain.normal_at(X), V) if np.any(on_bd) else np.ones(nb)
    active = ~(on_bd & (inward < -1e-12))
    times[~active] = 0.0
    status[~active] = "exit"

    x, v = X.copy(), V.copy()
    t = 0.0
    k = 0
    while np.any(active) and t < tmax:
        dt = min(step, tmax - t)
        idx = np.flatnonzero(active)
        xa, va = x[idx], v[idx]
        with np.errstate(all="ignore"):
            xn, vn = rk4_step(field, xa, va, dt)
            k += 1
            if k % RENORM_EVERY == 0:
                vn = unit_speed(field, xn, vn)
        bad = ~(np.all(np.isfinite(xn), axis=1) & np.all(np.isfinite(vn), axis=1))
        if np.any(bad):
            for i in idx[bad]:
                status[i] = "breakdown"
            active[idx[bad]] = False
        ok = ~bad
        dn = np.full(len(idx), np.inf)
        dn[ok] = domain.depth(xn[ok])
        crossed = ok & (dn < 0)
        if np.any(crossed):
            ci = idx[crossed]
            lo = np.zeros(len(ci))
            hi = np.full(len(ci), dt)
            x0, v0 = xa[crossed], va[crossed]
            while np.max(hi - lo) > _BISECT_TOL:
                mid = 0.5 * (lo + hi)
                xm, _ = rk4_step(field, x0, v0, mid)
                inside = domain.depth(xm) >= 0
                lo = np.where(inside, mid, lo)
                hi = np.where(inside, hi, mid)
            xb, vb = rk4_step(field, x0, v0, hi)
            times[ci] = t + hi
            status[ci] = "exit"
            xe[ci] = xb
            ve[ci] = vb
            active[ci] = False
            if record:
                for j, i in enumerate(ci):
                    samples[i].append((t + hi[j], xb[j], vb[j]))
        keep = ok & ~crossed
        ki = idx[keep]
        mind[ki] = np.minimum(mind[ki], lastd[ki])
        lastd[ki] = dn[keep]
        x[idx[keep]] = xn[keep]
        v[idx[keep]] = vn[keep]
        t += dt
        if record:
            for j in np.flatnonzero(keep):
                samples[idx[j]].append((t, xn[j].copy(), vn[j].copy()))
    still = active
    xe[still] = x[still]
    ve[still] = v[still]
    return times, status, xe, ve, samples, mind


def shoot_geodesic(field: MetricField, domain: ParamDomain, x, v, tmax: float | None = None,
                   step: float | None = None) -> GeodesicPath:
    """Integrate the unit-speed geodesic from (x, v) until it leaves the domain or tmax."""
    x = np.asarray(x, float).reshape(2)
    v = np.asarray(v, float).reshape(2)
    speed = float(field.norm(x, v))
    if abs(speed - 1.0) > 1e-9:
        raise ValueError(f"initial velocity must have unit metric length, got {speed:.12g}")
    step = _default_step(domain) if step is None else step
    tmax = _default_tmax(domain) if tmax is None else tmax
    times, status, xe, ve, samples, _ = _integrate(field, domain, x, v, tmax, step, record=True)
    s = samples[0]
    t = np.array([r[0] for r in s])
    pts = np.array([r[1] for r in s])
    vel = np.array([r[2] for r in s])
    path = GeodesicPath(t, pts, vel, step, status[0])
    if status[0] == "exit":
        ang = float(crossing_angle(field, domain, xe[0], ve[0])[0])
        path.exit_time = float(times[0])
        path.crossing_angle = ang
        path.tangential = ang < ANGLE_TOL
    return path


def exit_times(field: MetricField, domain: ParamDomain, X, V, tmax: float | None = None,
               step: float | None = None):
    """Batched exit times.  Returns (times, tangential flags, angles, exit points)."""
    step = _default_step(domain) if step is None else step
    tmax = _default_tmax(domain) if tmax is None else tmax
    times, status, xe, ve, _, _ = _integrate(field, domain, X, V, tmax, step, record=False)
    ang = np.full(len(times), np.nan)
    ex = status == "exit"
    if np.any(ex):
        ang[ex] = crossing_angle(field, domain, xe[ex], ve[ex])
    times = np.where(ex, times, np.inf)
    return times, ang < ANGLE_TOL, ang, xe


def exit_time(field: MetricField, domain: ParamDomain, x, v, tmax: float | None = None) -> ExitTime:
    """First positive boundary-crossing time of the geodesic from (x, v).

    Grazing exits (crossing angle below ``ANGLE_TOL``) are flagged as
    tangential; the value is still returned.
    """
    times, tang, ang, _ = exit_times(field, domain, np.reshape(x, (1, 2)), np.reshape(v, (1, 2)), tmax)
    return ExitTime(float(times[0]), bool(tang[0]), float(ang[0]))
