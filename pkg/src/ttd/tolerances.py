"""Numerical tolerances shared by reconstruction, equivalence checks and the CLI.

Length tolerances are multiples of the mesh pitch ``h``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields


@dataclass(frozen=True)
class Tolerances:
    tie: float = 3.0            # closest-boundary multiplicity, x h
    boundary: float = 6.0       # boundary flag on sup f_p, x h
    cut: float = 6.0            # competing-minimum gap for cut-locus labels, x h
    grad: float = 0.05          # geodesic-image direction match
    match: float = 8.0          # manifold matching residual, x h
    cond_max: float = 50.0      # interior chart Jacobian proxy
    patch: float = 10.0         # chart patch radius, x receiver spacing
    angle: float = 1e-3         # tangential grazing, radians
    jac: float = 0.05           # boundary chart Jacobian entry floor

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown tolerance keys {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


DEFAULT = Tolerances()
