import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttd.dataset import AtlasMismatch, TTDRecord
from ttd.domain import GeometryError, make_atlas
from ttd.reconstruction import (ChartError, PreconditionError, boundary_defining_function, boundary_distance_matrix,
                                build_boundary_chart, build_interior_chart, classify_cut_locus,
                                dd_locate, depth_proxy, embedding_distance, match_manifolds,
                                recover_boundary_distance, recover_boundary_metric, recover_geodesic_image)
from ttd.reconstruction.cutlocus import local_minima
from ttd.reconstruction.embedding import check_bijection
from ttd.synthesis import arrival_times, synth_dataset
from ttd.truth import positions

H = 0.01


def row_at(ds, p):
    return int(np.argmin(np.linalg.norm(positions(ds) - np.asarray(p), axis=1)))


# boundary distances and metric


def test_recovered_distance_is_a_lower_bound(disk_grid, disk_atlas):
    M = boundary_distance_matrix(disk_grid)
    P = disk_atlas.positions
    chord = np.linalg.norm(P[:, None] - P[None], axis=2)
    assert np.all(M == M.T)
    assert np.max(M - chord) <= 2 * H
    # antipodal pair: the best sources sit one grid step inside the boundary
    assert recover_boundary_distance(disk_grid, 0, 64) == pytest.approx(2.0, abs=0.1 + 2 * H)


def test_recovered_distance_grows_with_data(disk_grid):
    half = disk_grid.subset(np.arange(0, len(disk_grid), 2))
    for i, j in [(0, 64), (3, 17), (10, 90)]:
        assert recover_boundary_distance(half, i, j) <= recover_boundary_distance(disk_grid, i, j)


def test_relabelling_sources_changes_nothing(disk_grid):
    perm = np.random.default_rng(0).permutation(len(disk_grid))
    shuffled = disk_grid.subset(perm)
    assert np.array_equal(boundary_distance_matrix(shuffled), boundary_distance_matrix(disk_grid))


def test_boundary_metric_disk(disk_grid):
    g = recover_boundary_metric(disk_grid)
    # neighbour distances are underestimated, never over
    assert np.all(g <= 1 + 2 * H) and np.all(g >= 0.95)


def test_boundary_metric_conformal(conformal_annulus, annulus_atlas):
    g = recover_boundary_metric(conformal_annulus)
    exact = (1 + 0.3 * annulus_atlas.positions[:, 0]) ** 2
    assert np.max(np.abs(g / exact - 1)) < 0.1


# cut locus and boundary defining function


def test_cut_labels_disk(euclid, disk, disk_atlas):
    ds = synth_dataset(euclid, disk, disk_atlas, [[0, 0], [0.5, 0], [0.97, 0], [0, -0.6]], seed=0)
    lab = dict(zip(map(tuple, positions(ds).tolist()), classify_cut_locus(ds)))
    assert lab[(0.0, 0.0)] == "on_cut"
    assert lab[(0.5, 0.0)] == lab[(0.97, 0.0)] == lab[(0.0, -0.6)] == "off_cut"


def test_cut_labels_annulus(annulus_grid):
    r = np.linalg.norm(positions(annulus_grid), axis=1)
    lab = np.array(classify_cut_locus(annulus_grid))
    assert np.all(lab[np.abs(r - 1.5) < 1e-9] == "on_cut")
    assert np.all(lab[np.abs(r - 1.5) > 0.1] == "off_cut")


def test_local_minima_wrap(disk_atlas):
    th = np.linspace(0, 2 * np.pi, 128, endpoint=False)
    mins = local_minima(disk_atlas, np.cos(2 * th))
    assert sorted(m.receiver for m in mins) == [32, 96]


def test_defining_function(disk_grid):
    k = row_at(disk_grid, [0.5, 0.0])
    bf = boundary_defining_function(disk_grid, k)
    assert bf.closest == 0 and not bf.on_boundary
    # twice the depth, less the deficit of the recovered antipodal distance
    assert 0.9 - 2 * H <= bf.sup <= 1.0 + 2 * H
    assert depth_proxy(disk_grid, [k])[0] == pytest.approx(bf.sup / 2)
    shallow = row_at(disk_grid, [0.95, 0.0])
    assert boundary_defining_function(disk_grid, shallow).sup <= 0.1 + 2 * H


def test_defining_function_rejects_cut_records(disk_grid):
    with pytest.raises(PreconditionError):
        boundary_defining_function(disk_grid, row_at(disk_grid, [0.0, 0.0]))


# embedding and matching


@given(st.lists(st.floats(-5, 5), min_size=8, max_size=8), st.lists(st.floats(-5, 5), min_size=8, max_size=8))
@settings(max_examples=50)
def test_embedding_distance_is_sup_of_matrix_difference(a, b):
    r1, r2 = TTDRecord("a", np.array(a)), TTDRecord("b", np.array(b))
    brute = np.max(np.abs(r1.D - r2.D))
    assert embedding_distance(r1, r2) == pytest.approx(brute, abs=1e-12)


def test_embedding_distance_shift_invariant():
    v = np.random.default_rng(1).normal(size=20)
    assert embedding_distance(TTDRecord("a", v), TTDRecord("b", v + 3.0)) == pytest.approx(0, abs=1e-12)
    with pytest.raises(AtlasMismatch):
        embedding_distance(TTDRecord("a", v), TTDRecord("b", v[:10]))


def test_bijection_checked():
    with pytest.raises(ValueError):
        check_bijection([0, 0, 1], 3)
    with pytest.raises(ValueError):
        check_bijection([0, 1], 3)


def test_self_match_is_exact(disk_grid):
    sub = disk_grid.subset(np.arange(0, len(disk_grid), 7))
    perm = sub.subset(np.random.default_rng(2).permutation(len(sub)))
    c = match_manifolds(sub, perm, np.arange(sub.m))
    assert np.all(c.residuals == 0)
    assert c.mutual_fraction == 1.0
    assert all(c.psi[i] == i for i in sub.ids)


def test_match_rejects_other_atlas(euclid, disk, disk_grid):
    other = synth_dataset(euclid, disk, make_atlas(disk, 64), [[0.1, 0.2]])
    with pytest.raises(AtlasMismatch):
        match_manifolds(disk_grid, other, np.arange(disk_grid.m))


# charts


def test_boundary_chart_rejects_closest_receiver(disk_grid):
    with pytest.raises(ChartError):
        build_boundary_chart(disk_grid, 0, 0)


def test_interior_chart_degenerate_candidates(annulus_grid):
    lab = classify_cut_locus(annulus_grid)
    k = row_at(annulus_grid, [1.3, 0.4])
    assert lab[k] == "off_cut"
    zp = int(np.argmin(annulus_grid.values[k]))
    with pytest.raises(ChartError):
        build_interior_chart(annulus_grid, k, [zp])
    at = annulus_grid.atlas
    with pytest.raises(ChartError):
        build_interior_chart(annulus_grid, k, [zp, at.neighbors(zp)[1]])
    with pytest.raises(ValueError):
        build_interior_chart(annulus_grid, k, [zp, annulus_grid.m])
    rec = build_interior_chart(annulus_grid, k, [*at.neighbors(zp, 6), at.neighbors(zp, 3)[1]])
    assert rec.rank == 2 and rec.condition <= 50


def test_interior_chart_rejects_cut_anchor(annulus_grid):
    with pytest.raises(ChartError):
        build_interior_chart(annulus_grid, row_at(annulus_grid, [1.5, 0.0]), [0, 10, 20])


# geodesic image


def test_geodesic_image_grazing_and_invalid(disk_grid):
    g = recover_geodesic_image(disk_grid, 0, 0.99)
    assert g.grazing and g.ids == []
    assert recover_geodesic_image(disk_grid, 0, 0.2, inward=False).grazing
    with pytest.raises(ValueError):
        recover_geodesic_image(disk_grid, 0, 1.5)


def test_geodesic_image_normal_ray(disk_grid):
    g = recover_geodesic_image(disk_grid, 0, 0.0)
    pts = positions(disk_grid)[[disk_grid.index_of(i) for i in g.ids]]
    assert len(pts) >= 10
    assert np.max(np.abs(pts[:, 1])) <= 3 * H
    assert np.all(np.diff(g.distances) >= 0)


# double differences


def test_dd_locate_euclidean(euclid, disk):
    atlas = make_atlas(disk, 16)
    p0, p1 = np.array([0.2, 0.1]), np.array([0.23, 0.08])
    t0 = arrival_times(euclid, disk, atlas, p0, s=1.0)
    t1 = arrival_times(euclid, disk, atlas, p1, s=4.0)
    res = dd_locate((p0, t0), t1, euclid, disk, atlas)
    assert np.linalg.norm(res.position - p1) < 0.05 * np.linalg.norm(p1 - p0)
    assert res.origin_shift == pytest.approx(3.0, abs=2 * H)
    assert res.rank == 3


def test_dd_locate_shape_mismatch(euclid, disk):
    atlas = make_atlas(disk, 16)
    with pytest.raises(ValueError):
        dd_locate(([0, 0], np.zeros(16)), np.zeros(15), euclid, disk, atlas)
