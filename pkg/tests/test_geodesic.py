import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttd.distance import distance
from ttd.geodesic import exit_time, flow, shoot_geodesic, unit_speed


def test_disk_diameter(euclid, disk):
    e = exit_time(euclid, disk, [-1.0, 0.0], [1.0, 0.0])
    assert e.time == pytest.approx(2.0, abs=1e-9)
    assert not e.tangential
    assert e.crossing_angle == pytest.approx(np.pi / 2, abs=1e-6)


def test_horizontal_chord(euclid, disk):
    e = exit_time(euclid, disk, [-np.sqrt(3) / 2, 0.5], [1.0, 0.0])
    assert e.time == pytest.approx(np.sqrt(3), abs=1e-9)


def test_tangent_start_is_flagged(euclid, disk):
    e = exit_time(euclid, disk, [1.0, 0.0], [0.0, 1.0])
    assert e.time < 1e-6
    assert e.tangential


def test_annulus_radial(euclid, annulus):
    assert exit_time(euclid, annulus, [1.5, 0.0], [1.0, 0.0]).time == pytest.approx(0.5, abs=1e-9)
    assert exit_time(euclid, annulus, [1.5, 0.0], [-1.0, 0.0]).time == pytest.approx(0.5, abs=1e-9)


def test_euclidean_paths_are_straight(euclid, disk):
    v = np.array([0.6, 0.8])
    p = shoot_geodesic(euclid, disk, [0.1, -0.2], v)
    off = p.points - np.array([0.1, -0.2])
    assert np.max(np.abs(off[:, 0] * v[1] - off[:, 1] * v[0])) < 1e-12


@given(st.floats(0, 2 * np.pi))
@settings(max_examples=20, deadline=None)
def test_conformal_flow_keeps_unit_speed(conformal, th):
    x = np.array([[0.2, -0.1]])
    v = unit_speed(conformal, x, np.array([[np.cos(th), np.sin(th)]]))
    _, xs, vs = flow(conformal, x, v, 0.6, 0.005)
    assert np.max(np.abs(conformal.norm(xs, vs) - 1.0)) < 1e-6


def test_conformal_shot_agrees_with_graph_distance(conformal, annulus):
    x0 = np.array([1.4, 0.3])
    for th in (0.3, 1.9, 4.0):
        v = unit_speed(conformal, x0, np.array([np.cos(th), np.sin(th)]))
        p = shoot_geodesic(conformal, annulus, x0, v, tmax=0.4)
        assert p.terminated_by == "tmax"
        assert abs(distance(conformal, annulus, x0, p.endpoint) - p.length) < 3 * annulus.h


def test_rejects_non_unit_velocity(euclid, disk):
    with pytest.raises(ValueError):
        shoot_geodesic(euclid, disk, [0.0, 0.0], [2.0, 0.0])
