import numpy as np
import pytest

from ttd.domain import atlas_from_points, attach_positions, build_domain, make_atlas
from ttd.metric import MetricField
from ttd.synthesis import synth_dataset

H = 0.01


@pytest.fixture(scope="session")
def euclid():
    return MetricField("euclidean")


@pytest.fixture(scope="session")
def conformal():
    return MetricField.from_spec({"type": "conformal", "c": "1+0.3*x"})


@pytest.fixture(scope="session")
def disk():
    return build_domain({"type": "disk", "R": 1.0}, H)


@pytest.fixture(scope="session")
def annulus():
    return build_domain({"type": "annulus", "r_in": 1.0, "r_out": 2.0}, H)


@pytest.fixture(scope="session")
def disk_atlas(disk):
    return attach_positions(disk, make_atlas(disk, 128))


@pytest.fixture(scope="session")
def annulus_atlas(annulus):
    return attach_positions(annulus, make_atlas(annulus, 128))


@pytest.fixture(scope="session")
def annulus_grid(euclid, annulus, annulus_atlas):
    """Euclidean annulus, sources on the 0.1 grid."""
    return synth_dataset(euclid, annulus, annulus_atlas, "grid:0.1", seed=0)


@pytest.fixture(scope="session")
def rotated_annulus(euclid, annulus, annulus_atlas):
    """The annulus grid dataset rotated by 0.7 rad: (dataset, phi, rotation matrix)."""
    th = 0.7
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    atlas2, order = atlas_from_points(annulus, annulus_atlas.positions @ R.T)
    phi = np.argsort(order)
    from ttd.synthesis import source_points

    pts = source_points(annulus, "grid:0.1") @ R.T
    ds = synth_dataset(euclid, annulus, atlas2, pts.tolist(), seed=1)
    return ds, phi, R


@pytest.fixture(scope="session")
def conformal_annulus(conformal, annulus, annulus_atlas):
    return synth_dataset(conformal, annulus, annulus_atlas, "grid:0.1", seed=2)


@pytest.fixture(scope="session")
def disk_grid(euclid, disk, disk_atlas):
    """Euclidean disk, sources on the 0.05 grid."""
    return synth_dataset(euclid, disk, disk_atlas, "grid:0.05", seed=3)


# acceptance summary ----------------------------------------------------------

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, name, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}: {name} ({detail})")
