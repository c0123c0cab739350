import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttd.domain import make_atlas
from ttd.metric import PRESETS, MetricError, MetricField, boundary_metric_restriction, metric_at


def test_euclidean_christoffel_vanishes(euclid):
    pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
    assert np.all(euclid.christoffel(pts) == 0)


def test_conformal_christoffel_at_origin(conformal):
    # g = c^2 I with c = 1 + 0.3 x: Gamma^1_11 = c_x/c, Gamma^1_22 = -c_x/c, Gamma^2_12 = c_x/c
    gam = conformal.christoffel(np.zeros(2))
    assert gam[0, 0, 0] == pytest.approx(0.3)
    assert gam[0, 1, 1] == pytest.approx(-0.3)
    assert gam[1, 0, 1] == pytest.approx(0.3)
    assert gam[1, 1, 0] == pytest.approx(0.3)
    assert gam[1, 0, 0] == pytest.approx(0.0) and gam[1, 1, 1] == pytest.approx(0.0)


@given(st.floats(-1, 1), st.floats(-1, 1))
@settings(max_examples=40, deadline=None)
def test_christoffel_symmetric_lower(x, y):
    f = MetricField.from_spec({"type": "general", "g11": "2+x*y", "g12": "0.3*sin(x)", "g22": "1.5+y^2"})
    gam = f.christoffel(np.array([x, y]))
    assert np.allclose(gam, np.swapaxes(gam, -1, -2), atol=1e-14)


def test_central_matches_analytic():
    spec = {"type": "general", "g11": "2+sin(x)*y", "g12": "0.2*x*y", "g22": "1+exp(0.3*x)"}
    d = 1e-4
    a = MetricField.from_spec(spec)
    c = MetricField.from_spec(spec, derivative="central", delta_g=d)
    pts = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    # third derivatives of these components are O(1)
    assert np.max(np.abs(a.dg(pts) - c.dg(pts))) < 10 * d * d


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_spd_on_grid(name):
    f = MetricField.from_spec(PRESETS[name])
    g = np.linspace(-2, 2, 100)
    X, Y = np.meshgrid(g, g)
    lam = f.check_spd(np.stack([X, Y], -1))
    assert lam.min() > 0
    assert np.allclose(f.g(np.stack([X, Y], -1)), np.swapaxes(f.g(np.stack([X, Y], -1)), -1, -2))


def test_boundary_restriction_conformal(conformal, annulus):
    at = make_atlas(annulus, 64)
    val = boundary_metric_restriction(conformal, annulus, at)
    assert np.allclose(val, (1 + 0.3 * at.positions[:, 0]) ** 2, rtol=1e-12)


def test_non_spd_raises():
    f = MetricField.from_spec({"type": "conformal", "c": "x"})
    with pytest.raises(MetricError):
        f.check_spd(np.array([[0.0, 0.5]]))
    g = MetricField.from_spec({"type": "general", "g11": "1", "g12": "2", "g22": "1"})
    with pytest.raises(MetricError):
        metric_at(g, [0.1, 0.1])


def test_parse_rejects_unknown_symbols():
    with pytest.raises(ValueError):
        MetricField.from_spec({"type": "conformal", "c": "1+z"})
    with pytest.raises(ValueError):
        MetricField.from_spec({"type": "conformal", "c": "__import__('os')"})


def test_multiplied_scales_tensor(conformal):
    pts = np.random.default_rng(2).uniform(-1, 1, (10, 2))
    assert np.allclose(conformal.multiplied(4).g(pts), 4 * conformal.g(pts))
