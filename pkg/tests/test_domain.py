import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttd.domain import (BoundaryAtlas, GeometryError, atlas_from_points, build_domain, make_atlas)

H = 0.01


def test_circle_lengths(disk, annulus):
    assert abs(disk.total_length - 2 * np.pi) < 1e-3
    assert abs(annulus.total_length - 6 * np.pi) < 1e-3
    assert abs(annulus.curves[0].length - 4 * np.pi) < 1e-3
    assert abs(annulus.curves[1].length - 2 * np.pi) < 1e-3


def test_polygon_length_and_orientation():
    sq = build_domain({"type": "polygon", "vertices": [[0, 0], [0, 1], [1, 1], [1, 0]]}, H)
    assert abs(sq.total_length - 4.0) < 1e-12
    c = sq.curves[0]
    s = np.linspace(0.1, 3.9, 20)
    assert np.all(sq.depth(c.point(s) + 0.25 * H * c.normal(s)) > 0)


def test_self_intersecting_polygon_rejected():
    bowtie = {"type": "polygon", "vertices": [[0, 0], [1, 1], [1, 0], [0, 1]]}
    with pytest.raises(GeometryError):
        build_domain(bowtie, H)


@pytest.mark.parametrize("h", [0.0, -0.01])
def test_nonpositive_pitch_rejected(h):
    with pytest.raises(ValueError):
        build_domain({"type": "disk", "R": 1.0}, h)


def test_bad_annulus_and_type():
    with pytest.raises(GeometryError):
        build_domain({"type": "annulus", "r_in": 2.0, "r_out": 1.0}, H)
    with pytest.raises(GeometryError):
        build_domain({"type": "torus"}, H)


@pytest.mark.parametrize("which", ["disk", "annulus"])
def test_normals_point_inward(which, request):
    dom = request.getfixturevalue(which)
    for c in dom.curves:
        s = np.linspace(0, c.length, 97, endpoint=False)
        probe = c.point(s) + 0.25 * H * c.normal(s)
        assert np.all(dom.depth(probe) > 0)
        assert np.all(dom.contains(c.point(s)))


def test_spline_domain_is_inside_out_safe():
    th = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    cps = np.stack([1.2 * np.cos(th), 0.8 * np.sin(th)], 1)
    for pts in (cps, cps[::-1]):
        dom = build_domain({"type": "spline", "control_points": pts.tolist()}, H)
        c = dom.curves[0]
        s = np.linspace(0, c.length, 50, endpoint=False)
        assert np.all(dom.depth(c.point(s) + 0.25 * H * c.normal(s)) > 0)
        assert dom.depth(np.array([0.0, 0.0])) > 0.5


def test_atlas_spacing_and_counts(annulus):
    at = make_atlas(annulus, 128)
    counts = np.bincount(at.curve)
    assert counts.sum() == 128 and np.all(counts >= 8)
    # receivers share out in proportion to length (2:1)
    assert abs(counts[0] - 2 * counts[1]) <= 2
    sp = at.spacing()
    for k, L in enumerate(at.curve_lengths):
        assert np.allclose(sp[at.curve == k], L / counts[k])


def test_atlas_needs_eight_per_curve(annulus):
    with pytest.raises(GeometryError):
        make_atlas(annulus, 15)


def test_atlas_header_roundtrip(annulus_atlas):
    back = BoundaryAtlas.from_header(annulus_atlas.to_header())
    assert np.array_equal(back.curve, annulus_atlas.curve)
    assert np.array_equal(back.arclength, annulus_atlas.arclength)
    assert back.curve_lengths == annulus_atlas.curve_lengths


def test_atlas_neighbors_wrap(disk_atlas):
    assert disk_atlas.neighbors(0) == (127, 1)
    assert disk_atlas.arc_gap(0, 127) == pytest.approx(-2 * np.pi / 128)


@given(st.floats(0.0, 2 * np.pi - 1e-6))
@settings(max_examples=30, deadline=None)
def test_atlas_from_points_recovers_order(disk, shift):
    th = np.mod(shift + np.arange(16) * 2 * np.pi / 16, 2 * np.pi)
    rng = np.random.default_rng(0)
    perm = rng.permutation(16)
    pts = np.stack([np.cos(th), np.sin(th)], 1)[perm]
    at, order = atlas_from_points(disk, pts)
    assert np.allclose(at.positions, pts[order], atol=1e-12)
    assert np.all(np.diff(at.arclength) > 0)


@given(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5))
@settings(max_examples=60, deadline=None)
def test_annulus_depth_matches_radii(annulus, x, y):
    r = np.hypot(x, y)
    assert annulus.depth(np.array([x, y])) == pytest.approx(min(r - 1.0, 2.0 - r), abs=1e-12)
