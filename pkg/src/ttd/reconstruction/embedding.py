"""Sup-norm embedding of sources and matching of two datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..dataset import AtlasMismatch, DataSet, TTDRecord, check_same_atlas
from ..tolerances import DEFAULT, Tolerances


def embedding_distance(r1: TTDRecord, r2: TTDRecord) -> float:
    """``max_{i,j} |D_1[i, j] - D_2[i, j]|`` computed in O(m)."""
    if r1.m != r2.m:
        raise AtlasMismatch(f"records have {r1.m} and {r2.m} receivers")
    w = r1.values - r2.values
    return float(w.max() - w.min())


def embedding_distances(A: np.ndarray, B: np.ndarray, chunk: int = 64) -> np.ndarray:
    """Pairwise embedding distances between the rows of A and B."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    out = np.empty((len(A), len(B)))
    for a in range(0, len(A), chunk):
        w = A[a:a + chunk, None, :] - B[None, :, :]
        out[a:a + chunk] = w.max(axis=2) - w.min(axis=2)
    return out


def check_bijection(phi, m: int) -> np.ndarray:
    phi = np.asarray(phi, dtype=int)
    if phi.shape != (m,) or not np.array_equal(np.sort(phi), np.arange(m)):
        raise ValueError("phi must be a permutation of the receiver indices")
    return phi


def pull_forward(values: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Express rows of ``values`` on the second atlas: ``out[:, phi[i]] = values[:, i]``."""
    out = np.empty_like(values)
    out[:, phi] = values
    return out


@dataclass
class Correspondence:
    phi: np.ndarray
    psi: dict                       # id in ds1 -> id in ds2 (unambiguous matches only)
    best: list                      # best ds2 id per ds1 record
    residuals: np.ndarray           # best residual per ds1 record
    ambiguous: list = field(default_factory=list)   # ds1 ids with a runner-up within match_tol
    mutual: np.ndarray = None       # per ds1 record: best match is mutual and unambiguous
    ids1: list = field(default_factory=list)

    @property
    def mutual_fraction(self) -> float:
        return float(np.mean(self.mutual)) if len(self.mutual) else 0.0

    def to_dict(self) -> dict:
        return {
            "phi": self.phi.tolist(),
            "psi": self.psi,
            "residuals": dict(zip(self.ids1, self.residuals.tolist())),
            "ambiguous": self.ambiguous,
            "mutual_fraction": self.mutual_fraction,
            "median_residual": float(np.median(self.residuals)),
        }


def match_manifolds(ds1: DataSet, ds2: DataSet, phi, tol: Tolerances = DEFAULT) -> Correspondence:
    """Match each record of ds1 to the ds2 record nearest in the embedding.

    Records of ds1 are relabelled through the receiver bijection ``phi``
    (``phi[i]`` is the ds2 receiver corresponding to ds1 receiver i).  A match
    whose runner-up residual lies within ``match_tol`` of the best one is
    reported as ambiguous and left out of ``psi``.
    """
    check_same_atlas(ds1.atlas, ds2.atlas)
    phi = check_bijection(phi, ds1.m)
    U = pull_forward(ds1.values, phi)
    R = embedding_distances(U, ds2.values)
    match_tol = tol.match * max(ds1.h, ds2.h)
    order = np.argsort(R, axis=1, kind="stable")
    best = order[:, 0]
    res = R[np.arange(len(R)), best]
    runner = R[np.arange(len(R)), order[:, 1]] if R.shape[1] > 1 else np.full(len(R), np.inf)
    amb = runner - res < match_tol
    back = np.argmin(R, axis=0)
    mutual = (back[best] == np.arange(len(R))) & ~amb
    psi = {ds1.ids[k]: ds2.ids[best[k]] for k in range(len(R)) if not amb[k]}
    return Correspondence(phi, psi, [ds2.ids[b] for b in best], res,
                          [ds1.ids[k] for k in np.flatnonzero(amb)], mutual, list(ds1.ids))
