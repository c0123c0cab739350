"""Geometric side conditions and equivalence tests between metrics.

* visibility: every boundary point emits a transversal, interior,
  minimizing geodesic whose endpoint is not a cut point;
* jets: agreement of the metric and its first derivatives at the boundary,
  each metric written in its own boundary normal coordinates;
* projective equivalence: the Christoffel difference has the form
  ``delta^k_i beta_j + delta^k_j beta_i``;
* the Matveev invariant ``(det G / det G~)^(2/3) G~(v, v)`` along the G flow.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distance import get_engine
from .domain import BoundaryAtlas, DomainError, ParamDomain, attach_positions
from .geodesic import ANGLE_TOL, _default_step, _default_tmax, _integrate, crossing_angle, flow, unit_speed
from .metric import MetricField
from .tolerances import DEFAULT, Tolerances

SWEEP = 64
REFINE_TOL = 1e-3
_GOLDEN = (np.sqrt(5.0) - 1) / 2
CERTIFICATES = ("transversal_at_both_ends", "interior_except_endpoints", "minimizing", "non_cut")


# visibility ----------------------------------------------------------------


@dataclass
class VisibilityReport:
    eta: np.ndarray            # (m, 2) chosen direction per receiver (metric unit)
    angle: np.ndarray          # angle of eta from the boundary tangent, in (0, pi)
    exit_time: np.ndarray
    certificates: dict         # name -> (m,) bool
    crossing: np.ndarray       # (m, 2) metric crossing angles at start and exit
    thresholds: dict
    best_failing: dict = field(default_factory=dict)   # receiver -> failed certificates of best candidate

    @property
    def passed_at(self) -> np.ndarray:
        return np.all(np.stack([self.certificates[c] for c in CERTIFICATES]), axis=0)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.passed_at))

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "thresholds": self.thresholds,
            "receivers": [
                {"eta": self.eta[i].tolist(), "angle": float(self.angle[i]),
                 "exit_time": float(self.exit_time[i]),
                 "crossing_angles": self.crossing[i].tolist(),
                 "certificates": {c: bool(self.certificates[c][i]) for c in CERTIFICATES},
                 "passed": bool(self.passed_at[i])}
                for i in range(len(self.angle))
            ],
            "best_failing": {str(k): v for k, v in self.best_failing.items()},
        }


class _Rays:
    """Certificate evaluation for batches of (receiver, angle) pairs."""

    def __init__(self, field_: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, tol: Tolerances):
        self.field = field_
        self.domain = domain
        self.atlas = atlas if atlas.positions is not None else attach_positions(domain, atlas)
        self.eng = get_engine(field_, domain)
        self.h = self.eng.h
        self.fields = self.eng.receiver_fields(self.atlas.positions)
        T = np.empty((atlas.m, 2))
        N = np.empty((atlas.m, 2))
        for k, c in enumerate(domain.curves):
            m = atlas.curve == k
            T[m] = c.tangent(atlas.arclength[m])
            N[m] = c.normal(atlas.arclength[m])
        self.T, self.N = T, N
        self.angle_tol = tol.angle
        self.slack = 4 * self.h
        self.curv_max = 1.0 / (tol.tie * self.h)
        self.step = _default_step(domain)
        self.tmax = _default_tmax(domain)

    def directions(self, z, theta):
        v = np.cos(theta)[:, None] * self.T[z] + np.sin(theta)[:, None] * self.N[z]
        return unit_speed(self.field, self.atlas.positions[z], v)

    def _dist(self, z, pts):
        out = np.empty(len(z))
        for r in np.unique(z):
            m = z == r
            out[m] = self.eng.evaluate(self.fields[r], pts[m])
        return out

    def evaluate(self, z, theta):
        z = np.asarray(z, dtype=int)
        theta = np.asarray(theta, dtype=float)
        X = self.atlas.positions[z]
        V = self.directions(z, theta)
        ell, status, xe, ve, _, mind = _integrate(self.field, self.domain, X, V, self.tmax, self.step, False)
        ex = status == "exit"
        a0 = crossing_angle(self.field, self.domain, X, V)
        a1 = np.full(len(z), np.nan)
        if np.any(ex):
            a1[ex] = crossing_angle(self.field, self.domain, xe[ex], ve[ex])
        transversal = ex & (a0 > self.angle_tol) & (a1 > self.angle_tol)
        interior = ex & (mind > self.domain.boundary_band) & np.isfinite(mind)
        d = np.full(len(z), np.inf)
        if np.any(ex):
            d[ex] = self._dist(z[ex], xe[ex])
        minimizing = ex & (ell <= d + self.slack)
        # smoothness of the distance from z along the boundary around the endpoint
        smooth = np.zeros(len(z), dtype=bool)
        curv = np.full(len(z), np.inf)
        if np.any(ex):
            c, s = self.domain.closest_boundary(xe[ex])
            vals = []
            for j in (-1, 0, 1):
                pts = np.empty((len(c), 2))
                for k, cv in enumerate(self.domain.curves):
                    m = c == k
                    if np.any(m):
                        pts[m] = cv.point(np.mod(s[m] + j * self.h, cv.length))
                vals.append(self._dist(z[ex], pts))
            curv[ex] = np.abs(vals[0] - 2 * vals[1] + vals[2]) / self.h ** 2
            smooth[ex] = curv[ex] <= self.curv_max
        return dict(V=V, ell=ell, a0=a0, a1=a1, transversal=transversal, interior=interior,
                    minimizing=minimizing, smooth=smooth, curv=curv)

    @staticmethod
    def score(r, stable):
        """Smallest crossing angle when every other certificate holds, else minus the failure count."""
        others = np.stack([r["interior"], r["minimizing"], r["smooth"] & stable])
        fails = np.sum(~others, axis=0) + ~r["transversal"]
        ang = np.fmin(r["a0"], np.nan_to_num(r["a1"], nan=-1.0))
        return np.where(np.all(others, axis=0), ang, -fails.astype(float))


def visibility_check(field_: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, tol: Tolerances = DEFAULT,
                     sweep: int = SWEEP) -> VisibilityReport:
    """Search, at every receiver, for a direction meeting the visibility certificates.

    ``sweep`` inward directions per receiver are tried; the best one is
    refined by golden-section search over the neighbouring sweep interval
    to ``1e-3`` rad, maximizing the smaller crossing angle.  The non-cut
    certificate requires a bounded second difference of the distance from
    the receiver along the boundary at the endpoint and minimizing
    neighbouring sweep directions (a stable unique minimizer).
    """
    rays = _Rays(field_, domain, atlas, tol)
    m = atlas.m
    thetas = (np.arange(sweep) + 0.5) * np.pi / sweep
    Z = np.repeat(np.arange(m), sweep)
    TH = np.tile(thetas, m)
    r = rays.evaluate(Z, TH)
    mini = r["minimizing"].reshape(m, sweep)
    left = np.concatenate([mini[:, :1], mini[:, :-1]], axis=1)
    right = np.concatenate([mini[:, 1:], mini[:, -1:]], axis=1)
    stable = (left & right).reshape(-1)
    score = rays.score(r, stable).reshape(m, sweep)
    best = np.argmax(score, axis=1)
    best_score = score[np.arange(m), best]
    flat = np.arange(m) * sweep + best
    stable_best = stable[flat]

    # golden-section refinement within one sweep interval of the best angle
    width = np.pi / sweep
    lo = np.clip(thetas[best] - width, 1e-6, np.pi - 1e-6)
    hi = np.clip(thetas[best] + width, 1e-6, np.pi - 1e-6)
    zs = np.arange(m)

    def f(th):
        return rays.score(rays.evaluate(zs, th), stable_best)

    c = hi - _GOLDEN * (hi - lo)
    d = lo + _GOLDEN * (hi - lo)
    fc, fd = f(c), f(d)
    while np.max(hi - lo) > REFINE_TOL:
        left_better = fc >= fd
        hi = np.where(left_better, d, hi)
        lo = np.where(left_better, lo, c)
        nc = hi - _GOLDEN * (hi - lo)
        nd = lo + _GOLDEN * (hi - lo)
        c, d = nc, nd
        fc, fd = f(c), f(d)
    th_ref = np.where(fc >= fd, c, d)
    ref_score = np.maximum(fc, fd)
    use = ref_score > best_score
    final = np.where(use, th_ref, thetas[best])
    fr = rays.evaluate(zs, final)

    certs = {
        "transversal_at_both_ends": fr["transversal"],
        "interior_except_endpoints": fr["interior"],
        "minimizing": fr["minimizing"],
        "non_cut": fr["smooth"] & stable_best,
    }
    thresholds = {"angle_tol": rays.angle_tol, "minimizing_slack": rays.slack,
                  "second_difference_max": rays.curv_max, "interior_band": domain.boundary_band,
                  "sweep": sweep, "refine_tol": REFINE_TOL}
    report = VisibilityReport(fr["V"], final, fr["ell"], certs, np.stack([fr["a0"], fr["a1"]], axis=1), thresholds)
    for i in np.flatnonzero(~report.passed_at):
        report.best_failing[int(i)] = [c for c in CERTIFICATES if not certs[c][i]]
    return report


# boundary jets ---------------------------------------------------------------


@dataclass
class JetReport:
    order0: np.ndarray      # per receiver |h - h~| at t = 0
    order1: np.ndarray      # per receiver max(|d_t h - d_t h~|, |d_s h - d_s h~|) at t = 0
    threshold: float
    order: int

    @property
    def deviation(self) -> np.ndarray:
        return self.order0 if self.order == 0 else np.maximum(self.order0, self.order1)

    @property
    def flagged(self) -> np.ndarray:
        return self.deviation > self.threshold

    def to_dict(self) -> dict:
        return {"order": self.order, "threshold": self.threshold, "order0": self.order0.tolist(),
                "order1": self.order1.tolist(), "flagged": self.flagged.tolist()}


def _normal_points(field_: MetricField, domain: ParamDomain, curve: np.ndarray, s: np.ndarray, ts) -> np.ndarray:
    """Points at metric distance t along the inward normal geodesics; shape (len(ts), n, 2)."""
    x = np.empty((len(s), 2))
    n = np.empty((len(s), 2))
    for k, c in enumerate(domain.curves):
        m = curve == k
        if np.any(m):
            ss = np.mod(s[m], c.length)
            x[m] = c.point(ss)
            n[m] = c.normal(ss)
    nu = unit_speed(field_, x, np.linalg.solve(field_.g(x), n[..., None])[..., 0])
    tmax = max(ts)
    steps = max(2, int(round(tmax / (domain.h / 8))))
    t, X, _ = flow(field_, x, nu, tmax, tmax / steps, renormalize=True)
    out = []
    for tt in ts:
        j = int(round(tt / (tmax / steps)))
        out.append(X[j])
    out = np.stack(out)
    if np.any(domain.depth(out[1:]) <= 0):
        raise DomainError("collar too thin: normal geodesics leave the domain within the stencil")
    return out


def _tangential_form(field_: MetricField, domain: ParamDomain, atlas: BoundaryAtlas, step: float) -> np.ndarray:
    """h(s, t) = g(d_s x, d_s x) in boundary normal coordinates; shape (3 s-offsets, 3 depths, m)."""
    ts = (0.0, step, 2 * step)
    H = []
    for ds in (-step, 0.0, step):
        P = {}
        for j in (-1, 1):
            P[j] = _normal_points(field_, domain, atlas.curve, atlas.arclength + ds + j * step, ts)
        dx = (P[1] - P[-1]) / (2 * step)
        mid = _normal_points(field_, domain, atlas.curve, atlas.arclength + ds, ts)
        H.append(np.einsum("tni,tnij,tnj->tn", dx, field_.g(mid), dx))
    return np.stack(H)


def boundary_jet_check(field1: MetricField, field2: MetricField, domain: ParamDomain, atlas: BoundaryAtlas,
                       order: int = 1, step: float | None = None) -> JetReport:
    """Compare the boundary jets of two metrics up to first order.

    In two dimensions boundary normal coordinates write the metric as
    ``dt^2 + h(s, t) ds^2``, so the comparison is on ``h`` and its first
    derivatives: one-sided second-order differences in t and central ones in
    s, with step h.  Receivers whose deviation exceeds ``10 h^2`` are flagged.
    """
    if order not in (0, 1):
        raise ValueError("jets are compared up to order 1")
    step = domain.h if step is None else float(step)
    A = _tangential_form(field1, domain, atlas, step)
    B = _tangential_form(field2, domain, atlas, step)
    D = A - B
    o0 = np.abs(D[1, 0])
    dt = np.abs((-3 * D[1, 0] + 4 * D[1, 1] - D[1, 2]) / (2 * step))
    dsd = np.abs((D[2, 0] - D[0, 0]) / (2 * step))
    return JetReport(o0, np.maximum(dt, dsd), 10 * step ** 2, order)


# projective equivalence ------------------------------------------------------


def _projective_system(n: int = 2) -> np.ndarray:
    """Matrix mapping beta to ``delta^k_i beta_j + delta^k_j beta_i`` flattened over (k, i, j)."""
    A = np.zeros((n, n, n, n))
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if k == i:
                    A[k, i, j, j] += 1
                if k == j:
                    A[k, i, j, i] += 1
    return A.reshape(n ** 3, n)


def projective_residual(field1: MetricField, field2: MetricField, points):
    """Least-squares 1-form beta and the largest remaining defect over the points.

    Returns (beta of shape (n_points, 2), residual).
    """
    pts = np.atleast_2d(np.asarray(points, float))
    field1.check_spd(pts)
    field2.check_spd(pts)
    diff = (field1.christoffel(pts) - field2.christoffel(pts)).reshape(len(pts), -1)
    A = _projective_system()
    beta, *_ = np.linalg.lstsq(A, diff.T, rcond=None)
    defect = diff - (A @ beta).T
    return beta.T, float(np.max(np.linalg.norm(defect, axis=1)))


# Matveev invariant -------------------------------------------------------------


@dataclass
class FlowResult:
    variation: float        # (max - min) / mean of I0 along the flow
    time: float             # integrated time (shorter than requested when truncated)
    truncated: bool
    values: np.ndarray


def matveev_invariant(G: MetricField, Gt: MetricField, x, v) -> np.ndarray:
    n = 2
    ratio = np.linalg.det(G.g(x)) / np.linalg.det(Gt.g(x))
    return ratio ** (2.0 / (n + 1)) * Gt.norm(x, v) ** 2


def matveev_flow_test(G: MetricField, Gt: MetricField, domain: ParamDomain, seeds, T: float,
                      step: float | None = None) -> list:
    """Relative variation of the Matveev invariant along G-geodesics from each seed.

    Seeds are (x, v) pairs; v is scaled to unit G-length.  The flow is not
    renormalized, so the variation measures conservation by the integrator.
    A geodesic leaving the domain is truncated at its last interior node.
    """
    step = domain.h / 2 if step is None else float(step)
    out = []
    for x, v in seeds:
        x = np.asarray(x, float).reshape(1, 2)
        v = unit_speed(G, x, np.asarray(v, float).reshape(1, 2))
        t, X, V = flow(G, x, v, T, step)
        X, V = X[:, 0], V[:, 0]
        inside = domain.depth(X) >= 0
        stop = len(t) if np.all(inside) else int(np.argmin(inside))
        I = matveev_invariant(G, Gt, X[:stop], V[:stop])
        var = float((I.max() - I.min()) / I.mean()) if stop > 0 else np.nan
        out.append(FlowResult(var, float(t[stop - 1]) if stop > 0 else 0.0, stop < len(t), I))
    return out
