import numpy as np
import pytest
from scipy.sparse.csgraph import dijkstra

from ttd.domain import DomainError
from ttd.distance import (boundary_cut_distance, boundary_distance, closest_boundary_set, distance, get_engine)

H = 0.01


def test_disk_centre_to_boundary(euclid, disk):
    assert abs(distance(euclid, disk, [0, 0], [1, 0]) - 1.0) < 2 * H
    assert boundary_distance(euclid, disk, [[0.0, 0.0]])[0] == pytest.approx(1.0, abs=2 * H)


def test_annulus_wraps_around_hole(euclid, annulus):
    d = distance(euclid, annulus, [1, 0], [-1, 0])
    assert abs(d - np.pi) < 0.02 * np.pi


def test_tangent_arc_tangent(euclid, annulus):
    # two tangent segments of length sqrt(1.5^2 - 1) plus the inner arc between tangency points
    exact = 2 * np.sqrt(1.25) + np.pi - 2 * np.arccos(1 / 1.5)
    d = distance(euclid, annulus, [-1.5, 0], [1.5, 0])
    assert abs(d - exact) < 0.02 * exact


def test_symmetry_and_triangle(euclid, annulus):
    rng = np.random.default_rng(4)
    r = rng.uniform(1.05, 1.95, 12)
    th = rng.uniform(0, 2 * np.pi, 12)
    pts = np.stack([r * np.cos(th), r * np.sin(th)], 1)
    D = np.array([[distance(euclid, annulus, a, b) for b in pts] for a in pts])
    assert np.max(np.abs(D - D.T)) <= 1e-12
    viol = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    assert viol.max() <= 4 * H


def test_raw_mode_matches_scipy_dijkstra(euclid, disk):
    eng = get_engine(euclid, disk)
    k = eng.n_lattice // 2
    df = eng._run(eng.coords[k], [k], [0.0], [k], False)
    ref = dijkstra(eng.graph, indices=k)
    assert np.allclose(df.values[:eng.n_nodes], ref, rtol=1e-12, atol=1e-12)


def test_straightening_only_shortens(euclid, conformal, annulus):
    rng = np.random.default_rng(5)
    for f in (euclid, conformal):
        for _ in range(5):
            th = rng.uniform(0, 2 * np.pi)
            a = np.array([1.5 * np.cos(th), 1.5 * np.sin(th)])
            b = a + rng.uniform(-0.2, 0.2, 2)
            s = distance(f, annulus, a, b)
            raw = distance(f, annulus, a, b, straighten=False)
            assert s - 1e-12 <= raw <= s + 4 * H


def test_closest_boundary_set(euclid, disk, disk_atlas, annulus, annulus_atlas):
    p = np.array([0.5, 0.0])
    idx, d = closest_boundary_set(euclid, disk, disk_atlas, p)
    excess = np.linalg.norm(disk_atlas.positions - p, axis=1) - 0.5
    assert set(np.flatnonzero(excess < 3 * H - 2 * H)) <= set(idx)
    assert set(idx) <= set(np.flatnonzero(excess < 3 * H + 2 * H))
    assert d.min() == pytest.approx(0.5, abs=2 * H)
    # the centre ties with every receiver
    idx, _ = closest_boundary_set(euclid, disk, disk_atlas, [0.0, 0.0])
    assert len(idx) == disk_atlas.m
    idx, _ = closest_boundary_set(euclid, annulus, annulus_atlas, [1.2, 0.0])
    assert np.all(annulus_atlas.curve[idx] == 1)


def test_boundary_cut_distance(euclid, disk, annulus):
    assert boundary_cut_distance(euclid, disk, 0, 0.3) == pytest.approx(1.0, abs=2 * H)
    assert boundary_cut_distance(euclid, annulus, 0, 1.0) == pytest.approx(0.5, abs=2 * H)
    assert boundary_cut_distance(euclid, annulus, 1, 1.0) == pytest.approx(0.5, abs=2 * H)


def test_exterior_point_rejected(euclid, disk):
    with pytest.raises(DomainError):
        distance(euclid, disk, [0, 0], [1.5, 0])
