import numpy as np
import pytest

from ttd.domain import DomainError, build_domain, make_atlas
from ttd.equivalence import (CERTIFICATES, boundary_jet_check, matveev_flow_test, matveev_invariant,
                             projective_residual, visibility_check)
from ttd.metric import MetricField

# round sphere in gnomonic coordinates: great circles are straight lines, so
# it is projectively equivalent to the flat metric
GNOMONIC = MetricField.from_spec({"type": "general", "g11": "(1+y^2)/(1+x^2+y^2)^2",
                                  "g12": "-x*y/(1+x^2+y^2)^2", "g22": "(1+x^2)/(1+x^2+y^2)^2"})

PTS = np.random.default_rng(0).uniform(-0.8, 0.8, (40, 2))


def test_projective_constant_multiple(euclid):
    _, res = projective_residual(euclid, euclid.multiplied(4), PTS)
    assert res < 1e-12


def test_projective_gnomonic_sphere(euclid):
    beta, res = projective_residual(GNOMONIC, euclid, PTS)
    assert res < 1e-10
    assert np.max(np.abs(beta)) > 0.1


def test_projective_conformal_is_not(euclid, conformal):
    _, r12 = projective_residual(euclid, conformal, PTS)
    _, r21 = projective_residual(conformal, euclid, PTS)
    assert r12 > 0.1
    assert r12 == pytest.approx(r21, rel=1e-12)


def test_matveev_conserved_for_projective_pair(euclid, disk):
    seeds = [(x, [np.cos(a), np.sin(a)]) for x, a in zip(PTS[:6] * 0.5, np.linspace(0, 3, 6))]
    for r in matveev_flow_test(GNOMONIC, euclid, disk, seeds, 0.3):
        assert r.variation < 1e-8


def test_matveev_integrator_order(euclid, disk):
    seed = [([-0.3, 0.1], [1.0, 0.4])]
    e1 = matveev_flow_test(GNOMONIC, euclid, disk, seed, 0.5, step=0.1)[0].variation
    e2 = matveev_flow_test(GNOMONIC, euclid, disk, seed, 0.5, step=0.05)[0].variation
    assert e2 > 0 and np.log2(e1 / e2) >= 3


def test_matveev_truncates_at_exit(euclid, conformal, disk):
    r = matveev_flow_test(conformal, euclid, disk, [([0.8, 0.0], [1.0, 0.0])], 1.0)[0]
    # metric speed 1.24 at x = 0.8, so the exit comes near t = 0.248
    assert r.truncated and 0.24 <= r.time <= 0.25
    x, v = np.array([0.1, 0.2]), np.array([0.6, 0.8])
    assert matveev_invariant(euclid, euclid, x, v) == pytest.approx(1.0)


def test_jets_identical(euclid, annulus):
    at = make_atlas(annulus, 32)
    rep = boundary_jet_check(euclid, euclid, annulus, at)
    assert np.all(rep.deviation == 0) and not np.any(rep.flagged)


def test_jets_scaled_metric_flagged(euclid, disk):
    at = make_atlas(disk, 16)
    rep = boundary_jet_check(euclid, euclid.multiplied(1.1), disk, at, order=0)
    # central chords of the unit circle give h = (sin(d)/d)^2 at t = 0
    d = disk.h
    assert np.allclose(rep.order0, 0.1 * (np.sin(d) / d) ** 2, atol=1e-9)
    assert np.all(rep.flagged)


def test_jets_argument_checks(euclid, disk):
    at = make_atlas(disk, 16)
    with pytest.raises(ValueError):
        boundary_jet_check(euclid, euclid, disk, at, order=2)
    with pytest.raises(DomainError):
        boundary_jet_check(euclid, euclid, disk, at, step=1.1)


def test_visibility_small_disk(euclid):
    dom = build_domain({"type": "disk", "R": 1.0}, 0.02)
    rep = visibility_check(euclid, dom, make_atlas(dom, 16), sweep=16)
    assert rep.passed
    assert np.all((rep.angle > 0) & (rep.angle < np.pi))
    d = rep.to_dict()
    assert len(d["receivers"]) == 16
    assert set(d["receivers"][0]["certificates"]) == set(CERTIFICATES)


def test_visibility_fails_beyond_equator():
    # stereographic sphere over radius 1.5 covers more than a hemisphere
    dom = build_domain({"type": "disk", "R": 1.5}, 0.02)
    rep = visibility_check(MetricField.from_spec({"type": "sphere"}), dom, make_atlas(dom, 16), sweep=16)
    assert not np.any(rep.passed_at)
    assert not np.any(rep.certificates["minimizing"])
