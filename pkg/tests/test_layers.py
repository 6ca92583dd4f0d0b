import numpy as np
import pytest

from conftest import scenario
from geoxray.errors import ReconstructionError
from geoxray.forward import ForwardModel, TableSinogram
from geoxray.layers import ReconstructionConfig, ball_radius, plan, reconstruct


def test_disk_plan_has_two_levels():
    sc = scenario("euclidean_disk12")
    lp = plan(sc.tiling, sc.domain)
    assert len(lp.levels) == 2
    assert lp.levels[0] == pytest.approx(1.0, abs=1e-9)
    assert lp.top_on_boundary and lp.merged_levels == 0
    names = sc.tiling.tile_names
    outer = sorted(names[k] for k in np.flatnonzero(lp.tile_level == 0))
    assert outer == sorted(n for n in names if n.startswith(("T1_", "T2_")))
    assert all(a.on_boundary for a in lp.anchors if a.level == 0)
    assert all(not a.on_boundary for a in lp.anchors if a.level == 1)


def test_plan_rejects_unknown_modes():
    sc = scenario("euclidean_disk12")
    with pytest.raises(ValueError):
        plan(sc.tiling, sc.domain, "fastest")


def test_ball_radius_excludes_other_vertices():
    T = scenario("poincare_subdisk12").tiling
    for v in range(len(T.vertices)):
        r = ball_radius(T, v)
        g = T.metric.metric_at(T.vertices[v])
        d = T.vertices - T.vertices[v]
        dist = np.sqrt(np.einsum("ni,ij,nj->n", d, g, d))
        assert 0 < r <= 0.5 * np.min(np.delete(dist, v)) + 1e-12


@pytest.fixture(scope="module")
def disk_runs():
    sc = scenario("euclidean_disk12")
    runs = {t: reconstruct(sc.domain, sc.tiling, ForwardModel(sc.domain, sc.field), threads=t)
            for t in (1, 3)}
    return sc, runs


def test_disk_values_are_recovered(disk_runs):
    sc, runs = disk_runs
    assert np.max(np.abs(runs[1].values - np.arange(1, 13))) < 1e-4
    methods = {r.method for r in runs[1].tiles.values()}
    assert methods <= {"tangent-boundary", "tangent-interior", "corner"}


def test_certificate_does_not_depend_on_thread_count(disk_runs):
    sc, runs = disk_runs
    assert runs[1].certificate_json(sc.tiling, sc.header) == runs[3].certificate_json(
        sc.tiling, sc.header)


def test_zero_field_gives_zero_values():
    sc = scenario("euclidean_disk12").with_values(np.zeros(12))
    rec = reconstruct(sc.domain, sc.tiling, ForwardModel(sc.domain, sc.field))
    assert np.max(np.abs(rec.values)) < 1e-10


def test_simple_mode_needs_geodesic_edges():
    sc = scenario("euclidean_ring12")
    with pytest.raises(ReconstructionError):
        reconstruct(sc.domain, sc.tiling, ForwardModel(sc.domain, sc.field),
                    mode="simple_geodesic")


def test_missing_data_names_the_anchor():
    sc = scenario("euclidean_disk12")
    empty = TableSinogram([])
    with pytest.raises(ReconstructionError) as exc:
        reconstruct(sc.domain, sc.tiling, empty, config=ReconstructionConfig(retries=0))
    assert exc.value.anchor in sc.tiling.vertex_names
