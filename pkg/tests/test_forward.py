import numpy as np
import pytest

from conftest import scenario
from geoxray.errors import DomainError, RegionError, TangencyError
from geoxray.forward import (SINOGRAM_COLUMNS, ForwardModel, RecordingSinogram, Region,
                             TableSinogram, meeting_time_derivative, meeting_times,
                             quadrature_oracle, ray_transform, read_csv, restricted_integral,
                             sinogram_rows, write_csv)
from geoxray.geodesic import jacobi, shoot
from geoxray.metric import euclidean
from geoxray.tiling import PiecewiseField


def chord(sc, q, w):
    return sc.domain.shoot_chords(np.array([q], float), np.array([w], float))[0]


def dense_labels(sc, tr, t_lo, t_hi, n=4000):
    t = np.linspace(t_lo, t_hi, n + 2)[1:-1]
    return t, sc.tiling.locate_many(tr.position(t))


@pytest.mark.parametrize("name,q,w", [
    ("euclidean_disk12", (0.0, 0.1), (1.0, 0.0)),
    ("euclidean_disk12", (0.05, -0.2), (0.3, 1.0)),
    ("poincare_subdisk12", (0.02, 0.05), (1.0, 0.4)),
    ("ellipse12", (0.1, 0.3), (-1.0, 0.2)),
])
def test_meeting_times_agree_with_dense_sampling(name, q, w):
    sc = scenario(name)
    w = sc.metric.normalize(np.array(q), np.array(w))
    tr = chord(sc, q, w)
    mt = meeting_times(sc.domain, sc.tiling, tr)
    assert len(mt.times) == len(mt.crossings) + 2 == len(mt.labels) + 1
    t, lab = dense_labels(sc, tr, mt.t_lo, mt.t_hi)
    idx = np.searchsorted(mt.times, t) - 1
    far = np.min(np.abs(t[:, None] - mt.times[None, :]), axis=1) > 1e-6
    assert np.array_equal(np.asarray(mt.labels)[idx][far & (lab >= 0)], lab[far & (lab >= 0)])


def test_horizontal_chord_through_the_disk():
    sc = scenario("euclidean_disk12")
    mt = meeting_times(sc.domain, sc.tiling, chord(sc, (0.0, 0.1), (1.0, 0.0)))
    assert mt.t_lo == pytest.approx(-np.sqrt(0.99), abs=1e-12)
    assert mt.t_hi == pytest.approx(np.sqrt(0.99), abs=1e-12)
    names = [sc.tiling.tile_names[k] for k in mt.labels]
    # clips T2_2 near B2 and T3_3 just above the x axis
    assert names == ["T1_1", "T2_2", "T3_1", "T3_0", "T3_3", "T2_0", "T1_0"]


def test_chord_inside_one_tile():
    sc = scenario("euclidean_disk12")
    c = np.array([np.cos(np.pi / 4), np.sin(np.pi / 4)])
    mt = meeting_times(sc.domain, sc.tiling, chord(sc, 0.99 * c, (-c[1], c[0])))
    assert mt.crossings == () and len(mt.labels) == 1
    assert mt.length == pytest.approx(2 * np.sqrt(1 - 0.99**2), abs=1e-12)


def test_chord_along_an_edge_is_rejected():
    sc = scenario("euclidean_disk12")
    fm = ForwardModel(sc.domain, sc.field)
    with pytest.raises(TangencyError):
        fm(np.zeros((1, 2)), np.array([[1.0, 1.0]]) / np.sqrt(2))


def test_zero_field_and_linearity():
    sc = scenario("poincare_subdisk12")
    tr = chord(sc, (0.03, -0.04), sc.metric.normalize(np.zeros(2), np.array([0.2, 1.0])))
    mt = meeting_times(sc.domain, sc.tiling, tr)
    assert ray_transform(PiecewiseField(sc.tiling, np.zeros(12)), mt) == 0.0
    assert ray_transform(sc.field.scaled(3.0), mt) == pytest.approx(3 * ray_transform(sc.field, mt))


def test_ray_transform_matches_quadrature_oracle():
    sc = scenario("poincare_subdisk12")
    rng = np.random.default_rng(5)
    for _ in range(5):
        q = rng.uniform(-0.2, 0.2, 2)
        w = sc.metric.normalize(q, rng.normal(size=2))
        tr = chord(sc, q, w)
        mt = meeting_times(sc.domain, sc.tiling, tr)
        assert ray_transform(sc.field, mt) == pytest.approx(quadrature_oracle(sc.domain, sc.field, tr),
                                                            abs=1e-6 * mt.length)


def test_restricted_integrals():
    sc = scenario("ellipse12")
    tr = chord(sc, (0.2, -0.1), (0.6, 0.8))
    mt = meeting_times(sc.domain, sc.tiling, tr)
    n = len(sc.tiling.tiles)
    assert restricted_integral(sc.field, mt, Region(frozenset(range(n)))) == pytest.approx(
        ray_transform(sc.field, mt), rel=1e-14)
    lengths = mt.tile_lengths(n)
    k = int(np.argmax(lengths))
    assert restricted_integral(sc.field, mt, Region(frozenset([k]))) == pytest.approx(
        sc.field.values[k] * lengths[k], rel=1e-14)
    with pytest.raises(RegionError):
        restricted_integral(sc.field, mt, Region(frozenset([n + 3])))


def test_ball_restriction_cuts_at_the_radius():
    sc = scenario("euclidean_disk12")
    tr = chord(sc, (0.0, 0.1), (1.0, 0.0))
    mt = meeting_times(sc.domain, sc.tiling, tr)
    region = Region.corner(range(12), sc.metric, np.array([0.0, 0.1]), 0.3)
    # the ball of radius 0.3 around the start holds the chord on (-0.3, 0.3)
    expect = sum(sc.field.values[k] * max(0.0, min(b, 0.3) - max(a, -0.3))
                 for k, a, b in zip(mt.labels, mt.times[:-1], mt.times[1:]))
    assert restricted_integral(sc.field, mt, region) == pytest.approx(expect, abs=1e-10)


def test_meeting_time_derivative_closed_forms():
    E = euclidean()
    tr = shoot(E, np.array([-1.0, 0.0]), np.array([1.0, 0.0]), (0.0, 2.0))
    J = jacobi(E, tr, [0.0, 1.0], [0.0, 0.0])
    s1, t1 = meeting_time_derivative(E, tr, J, 1.0, np.array([1.0, 1.0]) / np.sqrt(2))
    assert t1 == pytest.approx(1.0, abs=1e-12) and s1 == pytest.approx(np.sqrt(2), abs=1e-12)
    _, t2 = meeting_time_derivative(E, tr, J, 1.0, np.array([0.0, 1.0]))
    assert t2 == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(TangencyError):
        meeting_time_derivative(E, tr, J, 1.0, np.array([1.0, 0.0]))


def test_sinogram_rows_flag_tangent_chords():
    sc = scenario("euclidean_disk12")
    fm = ForwardModel(sc.domain, sc.field)
    Q = np.array([[0.0, 0.1], [0.0, 0.0]])
    W = np.array([[1.0, 0.0], [1.0, 1.0]]) / np.array([[1.0], [np.sqrt(2)]])
    rows = sinogram_rows(fm, Q, W)
    assert len(rows[0]) == len(SINOGRAM_COLUMNS)
    assert rows[0][-1] == 0 and np.isfinite(rows[0][7])
    assert rows[1][-1] == 1 and np.isnan(rows[1][7])


def test_sinogram_csv_round_trip(tmp_path):
    sc = scenario("euclidean_disk12")
    rec = RecordingSinogram(ForwardModel(sc.domain, sc.field))
    rng = np.random.default_rng(2)
    Q = rng.uniform(-0.4, 0.4, (6, 2))
    ang = rng.uniform(0, 2 * np.pi, 6)
    W = np.c_[np.cos(ang), np.sin(ang)]
    vals = rec(Q, W)
    path = tmp_path / "s.csv"
    write_csv(path, SINOGRAM_COLUMNS, sinogram_rows(lambda q, w: vals, Q, W), sc.header)
    header, rows = read_csv(path)
    assert header["scenario_hash"] == sc.hash and header["columns"] == list(SINOGRAM_COLUMNS)
    table = TableSinogram.from_csv(path)
    assert np.array_equal(table(np.array(rec.Q), np.array(rec.W)), vals)
    with pytest.raises(DomainError):
        table(np.array([[0.5, 0.5]]), np.array([[1.0, 0.0]]))
