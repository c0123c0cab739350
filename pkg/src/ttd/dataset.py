"""Travel-time-difference records and the dataset file format.

A record stores ``v_i = d(p, z_i) - d(p, z_0)``; the matrix
``D[i, j] = v_i - v_j`` is rebuilt on demand.  All stored values are
multiples of ``QUANTUM`` so that differences and sums of them are exact in
double precision, which makes antisymmetry and the cocycle identity hold
bitwise.

File layout (little-endian)::

    b"TTD1\\n" | u64 header length | header JSON | n*m float64 payload
    [ b"SEAL" | u64 length | sealed JSON | sha256 of sealed JSON ]

The header and payload carry no source coordinates.  The sealed section is
opaque here; only the test-harness module ``ttd.truth`` decodes it.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import BoundaryAtlas

MAGIC = b"TTD1\n"
SEAL_MAGIC = b"SEAL"
FORMAT_VERSION = 1
QUANTUM = 2.0 ** -40


class FormatError(ValueError):
    """Malformed or tampered dataset file."""


class AtlasMismatch(ValueError):
    """Records or datasets built on different receiver sets."""


def quantize(x):
    """Round to the nearest multiple of ``QUANTUM``."""
    return np.round(np.asarray(x, dtype=float) / QUANTUM) * QUANTUM


@dataclass(frozen=True, eq=False)
class TTDRecord:
    """One anonymized source, ``values[i] = d(p, z_i) - d(p, z_0)``."""

    source_id: str
    values: np.ndarray

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def D(self) -> np.ndarray:
        """Full difference matrix ``D[i, j] = d(p, z_i) - d(p, z_j)``."""
        return self.values[:, None] - self.values[None, :]

    def column(self, w: int) -> np.ndarray:
        """``z -> D(z, w)`` over receivers."""
        return self.values - self.values[w]

    def __eq__(self, other):
        return (isinstance(other, TTDRecord) and self.source_id == other.source_id
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(eq=False)
class DataSet:
    """Boundary receivers plus anonymized records, one row of ``values`` per source."""

    atlas: BoundaryAtlas
    ids: list
    values: np.ndarray
    provenance: str
    domain: dict = field(default_factory=dict)
    h: float = 0.0
    sealed: bytes | None = field(default=None, repr=False)
    rejected: list = field(default_factory=list)
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(len(self.ids), self.atlas.m)
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("source ids must be unique")

    def __len__(self):
        return len(self.ids)

    @property
    def m(self) -> int:
        return self.atlas.m

    @property
    def records(self) -> list:
        return [TTDRecord(i, row) for i, row in zip(self.ids, self.values)]

    def record(self, k: int) -> TTDRecord:
        return TTDRecord(self.ids[k], self.values[k])

    def index_of(self, source_id: str) -> int:
        return self.ids.index(source_id)

    def subset(self, rows) -> "DataSet":
        rows = np.asarray(rows, dtype=int)
        return DataSet(self.atlas, [self.ids[k] for k in rows], self.values[rows], self.provenance,
                       self.domain, self.h, self.sealed)

    def header(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "m": self.m,
            "n": len(self.ids),
            "atlas": self.atlas.to_header(),
            "domain": self.domain,
            "h": self.h,
            "source_ids": list(self.ids),
            "provenance": self.provenance,
        }

    def public_equal(self, other: "DataSet") -> bool:
        return self.header() == other.header() and np.array_equal(self.values, other.values)


def check_same_atlas(a: BoundaryAtlas, b: BoundaryAtlas) -> None:
    if a.m != b.m:
        raise AtlasMismatch(f"atlas sizes differ: {a.m} vs {b.m}")


def provenance_hash(domain_spec: dict, metric_spec: dict, h: float, atlas: BoundaryAtlas, extra=None) -> str:
    blob = json.dumps({"domain": domain_spec, "metric": metric_spec, "h": h, "atlas": atlas.to_header(),
                       "extra": extra, "version": FORMAT_VERSION}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def seal(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True).encode()


def to_bytes(ds: DataSet) -> bytes:
    buf = io.BytesIO()
    head = json.dumps(ds.header(), sort_keys=True).encode()
    buf.write(MAGIC)
    buf.write(struct.pack("<Q", len(head)))
    buf.write(head)
    buf.write(np.ascontiguousarray(ds.values, dtype="<f8").tobytes())
    if ds.sealed is not None:
        buf.write(SEAL_MAGIC)
        buf.write(struct.pack("<Q", len(ds.sealed)))
        buf.write(ds.sealed)
        buf.write(hashlib.sha256(ds.sealed).digest())
    return buf.getvalue()


def public_section(blob: bytes) -> bytes:
    """The header and payload bytes of a serialized dataset."""
    (hl,) = struct.unpack_from("<Q", blob, len(MAGIC))
    head = json.loads(blob[len(MAGIC) + 8: len(MAGIC) + 8 + hl])
    end = len(MAGIC) + 8 + hl + 8 * head["n"] * head["m"]
    return blob[:end]


def from_bytes(blob: bytes) -> DataSet:
    if not blob.startswith(MAGIC):
        raise FormatError("not a TTD dataset (bad magic)")
    pos = len(MAGIC)
    try:
        (hl,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        head = json.loads(blob[pos: pos + hl])
    except (struct.error, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise FormatError(f"corrupt header: {exc}") from exc
    pos += hl
    if head.get("version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {head.get('version')!r}")
    n, m = int(head["n"]), int(head["m"])
    nbytes = 8 * n * m
    if len(blob) < pos + nbytes:
        raise FormatError("truncated payload")
    values = np.frombuffer(blob, dtype="<f8", count=n * m, offset=pos).astype(np.float64).reshape(n, m)
    pos += nbytes
    sealed = None
    if pos < len(blob):
        if blob[pos: pos + 4] != SEAL_MAGIC:
            raise FormatError("unexpected trailing bytes")
        (sl,) = struct.unpack_from("<Q", blob, pos + 4)
        start = pos + 12
        sealed = bytes(blob[start: start + sl])
        digest = bytes(blob[start + sl: start + sl + 32])
        if hashlib.sha256(sealed).digest() != digest:
            raise FormatError("sealed section checksum mismatch")
    atlas = BoundaryAtlas.from_header(head["atlas"])
    return DataSet(atlas, list(head["source_ids"]), values, head["provenance"], head.get("domain", {}),
                   float(head.get("h", 0.0)), sealed)


def save_dataset(ds: DataSet, path) -> None:
    Path(path).write_bytes(to_bytes(ds))


def load_dataset(path) -> DataSet:
    return from_bytes(Path(path).read_bytes())
