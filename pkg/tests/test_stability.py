import json
from fractions import Fraction

import numpy as np
import pytest

from conftest import scenario
from geoxray.corner import CornerSystem
from geoxray.stability import (corner_condition, corner_constant, dense_condition,
                               reparam_constant, reparam_matrix, restricted_norms,
                               stability_geometry, stability_report, write_report)

EPS = 1e-2 * 2.0 ** -np.arange(6)
THETAS = np.linspace(-0.05, 0.05, 9)


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_constant_samples_have_unit_norm(order):
    one_d = restricted_norms(np.ones(len(EPS)), EPS, order)
    two_d = restricted_norms(np.ones((len(THETAS), len(EPS))), EPS, order, THETAS)
    # derivative terms are fit roundoff (Vandermonde conditioning) amplified by eps_max^-order
    tol = 1e-12 * EPS.max() ** -order
    assert one_d.value == pytest.approx(1.0, abs=tol)
    assert two_d.value == pytest.approx(1.0, abs=tol)


def test_order_zero_is_the_plain_sup():
    rng = np.random.default_rng(1)
    I = rng.normal(size=(len(THETAS), len(EPS)))
    assert restricted_norms(I, EPS, 0, THETAS).value == np.max(np.abs(I))


def test_linear_samples_add_their_slope():
    nrm = restricted_norms(3.0 * EPS, EPS, 1, intercept=False)
    assert nrm.sups["d_theta^0 d_eps^1"] == pytest.approx(3.0, rel=1e-10)
    assert nrm.value == pytest.approx(3.0 * EPS.max() + 3.0, rel=1e-10)


def test_reparametrisation_matrix_is_exact():
    M = reparam_matrix(3)
    assert M == ((1, 0, 0), (0, 1, 0), (-1, 0, Fraction(1, 2)))
    assert reparam_constant(3) == 1.5


def test_explicit_and_dense_conditions_agree():
    cs = CornerSystem.from_angles(np.radians([30, 60, 100, 150]))
    assert corner_condition(cs) == pytest.approx(dense_condition(cs), rel=1e-10)
    assert corner_constant(cs) == pytest.approx(corner_condition(cs) * reparam_constant(3))


@pytest.fixture(scope="module")
def disk_geometry():
    sc = scenario("euclidean_disk12")
    return sc, stability_geometry(sc.domain, sc.tiling)


def test_zero_field_passes_with_zero_bounds(disk_geometry):
    sc, geo = disk_geometry
    rep = stability_report(geo, np.zeros(12), sc.tiling.tile_names)
    assert rep.passed
    assert rep.global_bound["bound"] == 0 and rep.global_bound["max_abs_value"] == 0


def test_disk_field_satisfies_the_bounds(disk_geometry):
    sc, geo = disk_geometry
    rep = stability_report(geo, sc.field.values, sc.tiling.tile_names)
    assert rep.passed
    assert rep.boundary_bound["applicable"] is False or rep.boundary_bound["slack"] >= 0
    assert len(rep.tangents) > 0 and len(rep.corners) > 0


def test_report_is_homogeneous(disk_geometry):
    sc, geo = disk_geometry
    base = stability_report(geo, sc.field.values).to_dict()
    big = stability_report(geo, 10 * sc.field.values).to_dict()
    for t0, t1 in zip(base["tangent_tiles"], big["tangent_tiles"]):
        assert t1["norm_C1"] == pytest.approx(10 * t0["norm_C1"], rel=1e-12)
    for c0, c1 in zip(base["corners"], big["corners"]):
        assert c1["norm"] == pytest.approx(10 * c0["norm"], rel=1e-12)
        assert c1["C_C"] == c0["C_C"]
    assert big["global"]["bound"] == pytest.approx(10 * base["global"]["bound"], rel=1e-12)


def test_write_report(tmp_path, disk_geometry):
    sc, geo = disk_geometry
    paths = write_report(stability_report(geo, sc.field.values, sc.tiling.tile_names), tmp_path,
                         sc.header)
    data = json.loads((tmp_path / "stability.json").read_text())
    assert data["scenario_hash"] == sc.hash and data["pass"] is True
    csv_text = (tmp_path / "stability.csv").read_text()
    assert csv_text.startswith("# ") and "global" in csv_text
    assert (tmp_path / "condition.svg").read_text().lstrip().startswith("<")
    assert set(paths) == {"json", "csv", "svg"}
