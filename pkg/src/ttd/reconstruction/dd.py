"""Double-difference location of an event relative to a master event.

With the metric known, the arrival-time change at receiver z between the
master at p0 and a nearby event at p is linear in the offset to first
order: ``T_p(z) - T_p0(z) = grad d(., z)|_p0 . (p - p0) + ds``, where ds is the
difference of origin times.  Stacking receivers gives a small least-squares
problem for the offset (and ds).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..distance import get_engine
from ..domain import BoundaryAtlas, GeometryError, ParamDomain, attach_positions
from ..metric import MetricField


@dataclass
class DDResult:
    offset: np.ndarray        # estimated p - p0
    position: np.ndarray      # p0 + offset
    origin_shift: float       # estimated difference of origin times (0 when not solved for)
    residual: float           # RMS misfit of the linear system
    gradients: np.ndarray     # (m, 2) gradients of d(., z) at p0
    rank: int


def distance_gradient(field: MetricField, domain: ParamDomain, receivers, p0, step: float | None = None) -> np.ndarray:
    """Gradient of ``x -> d(x, z)`` at p0 for every receiver position z, shape (m, 2).

    Central differences of receiver-rooted distance fields of the forward engine.
    """
    eng = get_engine(field, domain)
    p0 = np.asarray(p0, float).reshape(2)
    d = eng.h if step is None else float(step)
    probes = p0 + d * np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    D = eng.receiver_distances(np.asarray(receivers, float), probes)
    return np.stack([(D[0] - D[1]) / (2 * d), (D[2] - D[3]) / (2 * d)], axis=1)


def dd_locate(master: tuple, event_arrivals, field: MetricField, domain: ParamDomain, atlas: BoundaryAtlas,
              origin_time: bool = True, step: float | None = None) -> DDResult:
    """Locate an event from its arrival times relative to a master event.

    ``master`` is ``(position, arrivals)``.  Arrival vectors are per receiver
    of ``atlas``; with ``origin_time`` the unknown origin-time difference is
    solved for, so either vector may carry an arbitrary constant shift
    (travel-time differences work as well as absolute arrivals).
    """
    p0, t0 = master
    p0 = np.asarray(p0, float).reshape(2)
    t0 = np.asarray(t0, float)
    t1 = np.asarray(event_arrivals, float)
    if t0.shape != (atlas.m,) or t1.shape != (atlas.m,):
        raise ValueError(f"arrival vectors must have one entry per receiver ({atlas.m})")
    pos = atlas.positions if atlas.positions is not None else attach_positions(domain, atlas).positions
    G = distance_gradient(field, domain, pos, p0, step)
    A = np.hstack([G, np.ones((atlas.m, 1))]) if origin_time else G
    rank = int(np.linalg.matrix_rank(A))
    if rank < A.shape[1]:
        raise GeometryError(f"receiver gradients span rank {rank} < {A.shape[1]} unknowns")
    b = t1 - t0
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    r = A @ x - b
    off = x[:2]
    return DDResult(off, p0 + off, float(x[2]) if origin_time else 0.0, float(np.sqrt(np.mean(r * r))), G, rank)
