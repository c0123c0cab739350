import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ttd.dataset import (QUANTUM, FormatError, from_bytes, load_dataset, public_section, quantize, save_dataset,
                         to_bytes)
from ttd.synthesis import arrival_times, parse_sources, source_points, synth_dataset, ttd_matrix
from ttd.truth import positions


def test_record_invariants(annulus_grid):
    r = annulus_grid.record(17)
    D = r.D
    assert np.all(D == -D.T)
    assert np.all(np.diag(D) == 0)
    i, j, k = 3, 40, 101
    assert D[i, j] + D[j, k] == D[i, k]
    assert np.all(np.mod(r.values / QUANTUM, 1) == 0)
    assert np.array_equal(r.column(5), D[:, 5])


def test_roundtrip_is_bitwise(tmp_path, annulus_grid):
    path = tmp_path / "a.ttd"
    save_dataset(annulus_grid, path)
    back = load_dataset(path)
    assert back.public_equal(annulus_grid)
    assert back.values.tobytes() == annulus_grid.values.tobytes()
    assert to_bytes(back) == path.read_bytes()
    assert np.array_equal(positions(back), positions(annulus_grid))


def test_public_section_hides_positions(annulus_grid):
    blob = to_bytes(annulus_grid)
    pub = public_section(blob)
    assert b"positions" not in pub and b"emission" not in pub
    head = json.loads(pub[13:13 + int.from_bytes(pub[5:13], "little")])
    assert set(head) == {"version", "m", "n", "atlas", "domain", "h", "source_ids", "provenance"}


def test_format_errors(annulus_grid):
    blob = to_bytes(annulus_grid)
    with pytest.raises(FormatError):
        from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(FormatError):
        from_bytes(blob[:len(public_section(blob)) - 8])
    tampered = bytearray(blob)
    tampered[-40] ^= 1
    with pytest.raises(FormatError):
        from_bytes(bytes(tampered))
    with pytest.raises(FormatError):
        from_bytes(public_section(blob) + b"junk")


@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0))
@settings(max_examples=25, deadline=None)
def test_emission_time_cancels(euclid, disk, disk_atlas, s1, s2):
    p = [0.3, -0.2]
    a = ttd_matrix(arrival_times(euclid, disk, disk_atlas, p, s1))
    b = ttd_matrix(arrival_times(euclid, disk, disk_atlas, p, s2))
    assert a.values.tobytes() == b.values.tobytes()


@given(st.floats(-1e3, 1e3))
def test_quantize_is_idempotent(x):
    q = quantize(x)
    assert quantize(q) == q and abs(q - x) <= QUANTUM / 2


def test_random_sources_deterministic(disk):
    a = source_points(disk, "random:100:7")
    b = source_points(disk, {"type": "random", "count": 100, "seed": 7})
    assert a.shape == (100, 2) and np.array_equal(a, b)
    assert np.all(disk.depth(a) > 0)


def test_grid_count_matches_lattice_count(annulus):
    i = np.arange(-20, 21)
    I, J = np.meshgrid(i, i)
    r2 = I ** 2 + J ** 2
    expected = int(np.sum((r2 > 100) & (r2 < 400)))
    assert len(source_points(annulus, "grid:0.1")) == expected


def test_bad_source_specs():
    for bad in ("grid", "lattice:0.1", "random:1:2:3", {"type": "blob"}):
        with pytest.raises(ValueError):
            parse_sources(bad)


def test_synth_is_deterministic_and_shuffled(euclid, disk, disk_atlas):
    pts = [[0.1, 0.1], [0.2, -0.3], [-0.5, 0.4], [0.0, 0.7]]
    a = synth_dataset(euclid, disk, disk_atlas, pts, seed=9)
    b = synth_dataset(euclid, disk, disk_atlas, pts, seed=9)
    assert to_bytes(a) == to_bytes(b)
    assert sorted(map(tuple, positions(a).tolist())) == sorted(map(tuple, pts))
    assert np.all(a.values[:, 0] == 0)


def test_synth_rejects_exterior_points(euclid, disk, disk_atlas):
    ds = synth_dataset(euclid, disk, disk_atlas, [[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]])
    assert len(ds) == 1
    assert [r["reason"] for r in ds.rejected] == ["on boundary", "outside domain"]


def test_arrival_times_example(euclid, disk, disk_atlas):
    a = arrival_times(euclid, disk, disk_atlas, [0.0, 0.0], s=2.5)
    assert np.allclose(a, 3.5, atol=2 * disk.h)
    assert ttd_matrix(a).values[0] == 0
    with pytest.raises(ValueError):
        ttd_matrix([0.0, np.inf])
