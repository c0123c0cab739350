"""Test-harness access to the sealed ground truth of a dataset.

Reconstruction code never imports this module.
"""

from __future__ import annotations

import json

import numpy as np

from .dataset import DataSet


def open_sealed(ds: DataSet) -> dict:
    """Map source id -> (position, emission time)."""
    if ds.sealed is None:
        raise ValueError("dataset carries no sealed section")
    data = json.loads(ds.sealed)
    return {sid: (np.asarray(p, dtype=float), float(s)) for sid, p, s in
            zip(data["source_ids"], data["positions"], data["emission_times"])}


def positions(ds: DataSet) -> np.ndarray:
    """True source positions in record order."""
    table = open_sealed(ds)
    return np.array([table[sid][0] for sid in ds.ids])


def metric_spec(ds: DataSet) -> dict:
    return json.loads(ds.sealed)["metric"]
