"""Riemannian metric fields on planar parameter domains.

Scalar fields are given as expression strings over ``x`` and ``y``.  Analytic
derivatives come from sympy; the ``central`` scheme differentiates sampled
values with step ``delta_g``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import sympy
from sympy.parsing.sympy_parser import convert_xor, parse_expr, standard_transformations

_X, _Y = sympy.symbols("x y", real=True)
_ALLOWED = {"x": _X, "y": _Y, "sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp,
            "sqrt": sympy.sqrt, "pi": sympy.pi}


class MetricError(ValueError):
    """Metric is not symmetric positive definite at some point."""


def parse_scalar(text: str) -> sympy.Expr:
    """Parse an expression string over x, y; ``^`` means power."""
    try:
        expr = parse_expr(str(text), local_dict=dict(_ALLOWED), global_dict={"__builtins__": {},
                          "Integer": sympy.Integer, "Float": sympy.Float, "Rational": sympy.Rational,
                          "Symbol": sympy.Symbol},
                          transformations=standard_transformations + (convert_xor,))
    except Exception as exc:  # sympy raises a zoo of exception types
        raise ValueError(f"cannot parse scalar field {text!r}: {exc}") from exc
    extra = expr.free_symbols - {_X, _Y}
    if extra:
        raise ValueError(f"unknown symbols {sorted(map(str, extra))} in {text!r}")
    return expr


def _compile(expr):
    fn = sympy.lambdify((_X, _Y), expr, modules="numpy")

    def call(x, y):
        out = fn(x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    return call


@dataclass(frozen=True, eq=False)
class MetricField:
    """Smooth SPD 2x2 tensor field.

    kind is ``euclidean``, ``conformal`` (g = c^2 I) or ``general``
    (components g11, g12, g22).
    """

    kind: str
    exprs: tuple = ()
    derivative: str = "analytic"
    delta_g: float = 1e-5

    def __post_init__(self):
        if self.kind not in ("euclidean", "conformal", "general"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.derivative not in ("analytic", "central"):
            raise ValueError(f"unknown derivative scheme {self.derivative!r}")
        need = {"euclidean": 0, "conformal": 1, "general": 3}[self.kind]
        if len(self.exprs) != need:
            raise ValueError(f"{self.kind} metric needs {need} expressions")
        comps = self._components()
        object.__setattr__(self, "_g", [_compile(e) for e in comps])
        grads = [[_compile(sympy.diff(e, v)) for v in (_X, _Y)] for e in comps]
        object.__setattr__(self, "_dg", grads)

    def _components(self):
        if self.kind == "euclidean":
            return [sympy.Integer(1), sympy.Integer(0), sympy.Integer(1)]
        if self.kind == "conformal":
            c = parse_scalar(self.exprs[0])
            return [c ** 2, sympy.Integer(0), c ** 2]
        return [parse_scalar(e) for e in self.exprs]

    @property
    def is_euclidean(self) -> bool:
        return self.kind == "euclidean"

    @property
    def spec(self) -> dict:
        if self.kind == "euclidean":
            return {"type": "euclidean"}
        if self.kind == "conformal":
            return {"type": "conformal", "c": self.exprs[0]}
        return {"type": "general", "g11": self.exprs[0], "g12": self.exprs[1], "g22": self.exprs[2]}

    @property
    def key(self) -> str:
        return json.dumps({"spec": self.spec, "d": self.derivative, "dg": self.delta_g}, sort_keys=True)

    @classmethod
    def from_spec(cls, spec: dict, derivative: str = "analytic", delta_g: float = 1e-5) -> "MetricField":
        kind = spec.get("type", "euclidean")
        if kind == "euclidean":
            return cls("euclidean", (), derivative, delta_g)
        if kind == "conformal":
            return cls("conformal", (str(spec["c"]),), derivative, delta_g)
        if kind == "general":
            return cls("general", (str(spec["g11"]), str(spec["g12"]), str(spec["g22"])), derivative, delta_g)
        if kind == "sphere":
            # round unit sphere in stereographic coordinates
            return cls("conformal", ("2/(1+x^2+y^2)",), derivative, delta_g)
        raise ValueError(f"unknown metric type {kind!r}")

    def with_scheme(self, derivative: str, delta_g: float | None = None) -> "MetricField":
        return MetricField(self.kind, self.exprs, derivative, self.delta_g if delta_g is None else delta_g)

    def multiplied(self, factor: str | float) -> "MetricField":
        """The field ``factor * g`` for a positive scalar expression."""
        f = str(factor)
        if self.kind == "euclidean":
            return MetricField("conformal", (f"sqrt({f})",), self.derivative, self.delta_g)
        if self.kind == "conformal":
            return MetricField("conformal", (f"({self.exprs[0]})*sqrt({f})",), self.derivative, self.delta_g)
        return MetricField("general", tuple(f"({e})*({f})" for e in self.exprs), self.derivative, self.delta_g)

    # evaluation ---------------------------------------------------------

    def g(self, points) -> np.ndarray:
        """Metric tensors, shape (..., 2, 2)."""
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        g11, g12, g22 = (f(x, y) for f in self._g)
        return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)

    def dg(self, points) -> np.ndarray:
        """Derivatives ``out[..., k, i, j] = d_k g_ij``."""
        p = np.asarray(points, dtype=float)
        if self.derivative == "central":
            d = self.delta_g
            out = []
            for e in (np.array([d, 0.0]), np.array([0.0, d])):
                out.append((self.g(p + e) - self.g(p - e)) / (2 * d))
            return np.stack(out, axis=-3)
        x, y = p[..., 0], p[..., 1]
        comps = [[f(x, y) for f in pair] for pair in self._dg]  # comps[c][k]
        out = []
        for k in range(2):
            g11, g12, g22 = comps[0][k], comps[1][k], comps[2][k]
            out.append(np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2))
        return np.stack(out, axis=-3)

    def christoffel(self, points) -> np.ndarray:
        """Christoffel symbols ``out[..., k, i, j] = Gamma^k_ij``."""
        g = self.g(points)
        dg = self.dg(points)
        ginv = np.linalg.inv(g)
        # Gamma_{l i j} = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
        lower = 0.5 * (np.einsum("...ilj->...lij", dg) + np.einsum("...jli->...lij", dg) - dg)
        return np.einsum("...kl,...lij->...kij", ginv, lower)

    def norm(self, points, vectors) -> np.ndarray:
        g = self.g(points)
        v = np.asarray(vectors, dtype=float)
        return np.sqrt(np.einsum("...i,...ij,...j->...", v, g, v))

    def check_spd(self, points) -> np.ndarray:
        """Minimum eigenvalue at each point; raises MetricError if any is <= 0."""
        g = self.g(points)
        lam = np.linalg.eigvalsh(g)[..., 0]
        bad = ~(lam > 0)
        if np.any(bad):
            where = np.asarray(points, dtype=float).reshape(-1, 2)[np.flatnonzero(bad.reshape(-1))[0]]
            raise MetricError(f"metric not positive definite at ({where[0]:.6g}, {where[1]:.6g})")
        return lam


def metric_at(field: MetricField, x) -> tuple[np.ndarray, np.ndarray]:
    """(g, Gamma) at a single point; Gamma[k, i, j] = Gamma^k_ij."""
    p = np.asarray(x, dtype=float).reshape(2)
    g = field.g(p)
    if not (np.all(np.isfinite(g)) and np.allclose(g, g.T) and np.linalg.eigvalsh(g)[0] > 0):
        raise MetricError(f"metric not positive definite at ({p[0]:.6g}, {p[1]:.6g})")
    return g, field.christoffel(p)


def boundary_metric_restriction(field: MetricField, domain, atlas) -> np.ndarray:
    """g(T, T) at each receiver, T the Euclidean-unit boundary tangent."""
    out = np.empty(atlas.m)
    for k, curve in enumerate(domain.curves):
        m = atlas.curve == k
        if not np.any(m):
            continue
        s = atlas.arclength[m]
        pts = curve.point(s)
        t = curve.tangent(s)
        g = field.g(pts)
        field.check_spd(pts)
        out[m] = np.einsum("ni,nij,nj->n", t, g, t)
    return out


def default_delta_g(h: float) -> float:
    return max(1e-5, h / 10.0)


PRESETS = {
    "euclidean": {"type": "euclidean"},
    "conformal": {"type": "conformal", "c": "1+0.3*x"},
    "sphere": {"type": "sphere"},
}
