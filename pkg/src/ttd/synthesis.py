"""Forward synthesis of travel-time-difference data."""

from __future__ import annotations

import numpy as np

from .dataset import DataSet, TTDRecord, provenance_hash, quantize, seal
from .distance import get_engine
from .domain import BoundaryAtlas, DomainError, ParamDomain, attach_positions
from .metric import MetricField

EMISSION_RANGE = (0.0, 10.0)


def _receiver_positions(domain, atlas):
    return atlas.positions if atlas.positions is not None else attach_positions(domain, atlas).positions


def arrival_times(field: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, p, s: float = 0.0) -> np.ndarray:
    """``d(p, z_i) + s`` for every receiver, on the quantized grid."""
    p = np.asarray(p, dtype=float).reshape(2)
    eng = get_engine(field, domain)
    eng.check_inside(p)
    d = eng.field_from(p).at(_receiver_positions(domain, atlas))
    return quantize(d) + quantize(s)


def ttd_matrix(arrivals, source_id: str = "") -> TTDRecord:
    """Record of arrival differences relative to the first receiver."""
    a = np.asarray(arrivals, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("arrival times must be finite")
    return TTDRecord(source_id, a - a[0])


def parse_sources(spec):
    """Normalize a sampling spec to ``(kind, params)``.

    Accepts ``"grid:0.1"``, ``"random:100:7"`` (count, seed), a dict with a
    ``type`` key, or an explicit list of points.
    """
    if isinstance(spec, str):
        kind, *rest = spec.split(":")
        if kind == "grid" and len(rest) == 1:
            return "grid", {"pitch": float(rest[0])}
        if kind == "random" and len(rest) in (1, 2):
            return "random", {"count": int(rest[0]), "seed": int(rest[1]) if len(rest) == 2 else 0}
        raise ValueError(f"bad source spec {spec!r}")
    if isinstance(spec, dict):
        kind = spec.get("type")
        if kind == "grid":
            return "grid", {"pitch": float(spec["pitch"])}
        if kind == "random":
            return "random", {"count": int(spec["count"]), "seed": int(spec.get("seed", 0))}
        if kind == "explicit":
            return "explicit", {"points": np.asarray(spec["points"], dtype=float).reshape(-1, 2)}
        raise ValueError(f"bad source spec {spec!r}")
    return "explicit", {"points": np.asarray(spec, dtype=float).reshape(-1, 2)}


def source_points(domain: ParamDomain, spec) -> np.ndarray:
    """Candidate source positions for a sampling spec (before boundary checks)."""
    kind, par = parse_sources(spec)
    if kind == "grid":
        pitch = par["pitch"]
        if pitch <= 0:
            raise ValueError("grid pitch must be positive")
        x0, y0, x1, y1 = domain.bbox
        xs = pitch * np.arange(np.ceil(x0 / pitch), np.floor(x1 / pitch) + 1)
        ys = pitch * np.arange(np.ceil(y0 / pitch), np.floor(y1 / pitch) + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        return pts[domain.depth(pts) > domain.boundary_band]
    if kind == "random":
        rng = np.random.default_rng(par["seed"])
        x0, y0, x1, y1 = domain.bbox
        out = []
        while sum(len(o) for o in out) < par["count"]:
            cand = rng.uniform((x0, y0), (x1, y1), size=(2 * par["count"], 2))
            out.append(cand[domain.depth(cand) > domain.boundary_band])
        return np.concatenate(out)[: par["count"]]
    return par["points"]


def _ids(rng, n):
    ids, seen = [], set()
    while len(ids) < n:
        tok = rng.bytes(8).hex()
        if tok not in seen:
            seen.add(tok)
            ids.append(tok)
    return ids


def synth_dataset(field: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, sources, seed: int = 0,
                  noise: float = 0.0, allow_boundary: bool = False) -> DataSet:
    """One anonymized record per source; positions and emission times are sealed.

    Records are shuffled and labelled with random tokens drawn from ``seed``.
    Sources outside the domain (or on the boundary unless ``allow_boundary``)
    are skipped and listed in ``DataSet.rejected``.  ``noise`` is the standard
    deviation of optional Gaussian noise on arrival times.
    """
    pts = np.atleast_2d(source_points(domain, sources))
    depth = domain.depth(pts)
    floor = -domain.boundary_band if allow_boundary else domain.boundary_band
    ok = depth > floor if not allow_boundary else depth >= floor
    rejected = [{"index": int(k), "point": pts[k].tolist(),
                 "reason": "outside domain" if depth[k] < -domain.boundary_band else "on boundary"}
                for k in np.flatnonzero(~ok)]
    pts = pts[ok]
    if len(pts) == 0:
        raise DomainError("no admissible sources")
    rng = np.random.default_rng(seed)
    emission = rng.uniform(*EMISSION_RANGE, size=len(pts))
    order = rng.permutation(len(pts))
    ids = _ids(rng, len(pts))

    eng = get_engine(field, domain)
    pos = _receiver_positions(domain, atlas)
    if len(pts) >= atlas.m:
        dist = eng.receiver_distances(pos, pts)
    else:
        dist = np.stack([f.at(pos) for f in eng.fields_from(pts)])
    if not np.all(np.isfinite(dist)):
        raise DomainError("some receivers are unreachable from a source")
    arrivals = quantize(dist) + quantize(emission)[:, None]
    if noise > 0:
        arrivals = quantize(arrivals + np.random.default_rng([seed, 1]).normal(0.0, noise, arrivals.shape))
    values = arrivals - arrivals[:, :1]

    pts, emission, values = pts[order], emission[order], values[order]
    sealed = seal({"source_ids": ids, "positions": pts.tolist(), "emission_times": emission.tolist(),
                   "metric": field.spec})
    prov = provenance_hash(domain.spec, field.spec, domain.h, atlas,
                           extra={"sources": _spec_repr(sources), "seed": seed, "noise": noise})
    return DataSet(atlas, ids, values, prov, dict(domain.spec), domain.h, sealed, rejected)


def _spec_repr(spec):
    kind, par = parse_sources(spec)
    return {"type": kind, **{k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in par.items()}}
