import numpy as np
import pytest

from conftest import scaled_disk, scenario
from geoxray.domain import (boundary_curvature_samples, boundary_jerk, boundary_taylor,
                            foliation_report, geodesic_battery, normal_coordinates)
from geoxray.errors import FoliationError
from geoxray.geodesic import shoot
from geoxray.metric import poincare_disk
from geoxray.scenario import parse_scenario

SADDLE = """
name: saddle
metric: {kind: euclidean, chart: [-2, 2, -2, 2]}
domain:
  boundary: {shape: circle, center: [0, 0], radius: 1.0}
  foliation: x**2 - y**2
"""


@pytest.mark.parametrize("theta", [0.0, 1.0, 2.5, 4.0])
def test_unit_circle_curvature_and_jerk(theta):
    d = scenario("euclidean_disk12").domain
    p = np.array([np.cos(theta), np.sin(theta)])
    bt = boundary_taylor(d, p)
    assert bt.kappa == pytest.approx(1.0, abs=1e-6)
    assert abs(bt.jerk) < 1e-4


def test_ellipse_curvature_at_minor_vertex():
    d = scenario("ellipse12").domain
    assert boundary_taylor(d, np.array([0.0, -1.0])).kappa == pytest.approx(0.25, abs=1e-6)


def test_circle_of_radius_two():
    d = scaled_disk(2.0).domain
    assert boundary_taylor(d, np.array([0.0, -2.0])).kappa == pytest.approx(0.5, abs=1e-6)


def test_cubic_curvature_and_jerk_sign():
    d = scenario("cubic").domain
    p = np.zeros(2)
    assert boundary_taylor(d, p, np.array([1.0, 0.0])).kappa == pytest.approx(1.0, abs=1e-6)
    assert boundary_jerk(d, p, np.array([1.0, 0.0])) == pytest.approx(6.0, rel=1e-3)
    assert boundary_jerk(d, p, np.array([-1.0, 0.0])) == pytest.approx(-6.0, rel=1e-3)


def test_curvature_samples_on_closed_boundaries():
    assert np.allclose(boundary_curvature_samples(scenario("euclidean_disk12").domain, 32), 1.0,
                       atol=1e-6)
    k = boundary_curvature_samples(scenario("ellipse12").domain, 64)
    # x^2/4 + y^2 = 1 has curvature between b/a^2 and a/b^2
    assert k.min() == pytest.approx(0.25, abs=1e-4) and k.max() == pytest.approx(2.0, abs=1e-3)


def test_boundary_frame_is_orthonormal_and_inward():
    d = scenario("poincare_subdisk12").domain
    p = np.array([0.3, 0.4])
    om, nu = d.boundary_frame(p)
    m = d.metric
    assert m.norm(p, om) == pytest.approx(1.0) and m.norm(p, nu) == pytest.approx(1.0)
    assert m.inner(p, om, nu) == pytest.approx(0.0, abs=1e-14)
    assert d.rho(p - 0.01 * nu) < 0 < d.rho(p + 0.01 * nu)


def test_normal_coordinates_round_trip():
    m = poincare_disk()
    p = np.array([0.1, -0.2])
    chart = normal_coordinates(m, p)
    rng = np.random.default_rng(0)
    for c in rng.uniform(-0.14, 0.14, (5, 2)):
        q = chart.exp(c)[0]
        assert np.allclose(chart.log(q), c, atol=1e-9)


def test_normal_coordinates_flat_case_is_affine():
    d = scenario("euclidean_disk12").domain
    p = np.array([0.2, 0.3])
    om = np.array([np.cos(0.4), np.sin(0.4)])
    chart = normal_coordinates(d.metric, p, om, np.array([-om[1], om[0]]))
    assert np.allclose(chart.exp([0.5, -0.25])[0], p + 0.5 * om - 0.25 * np.array([-om[1], om[0]]))


def test_normal_coordinates_kill_christoffels_at_the_base_point():
    m = poincare_disk()
    p = np.array([0.2, 0.1])
    chart = normal_coordinates(m, p)
    h = 1e-3
    # the pulled-back metric has vanishing first derivatives at the origin
    def pulled(c):
        J = np.column_stack([(chart.exp(c + h * e)[0] - chart.exp(c - h * e)[0]) / (2 * h)
                             for e in np.eye(2)])
        return J.T @ m.metric_at(chart.exp(c)[0]) @ J

    for e in np.eye(2):
        dg = (pulled(0.01 * e) - pulled(-0.01 * e)) / 0.02
        assert np.max(np.abs(dg)) < 1e-4


def test_squared_radius_is_a_convex_foliation():
    d = scenario("euclidean_disk12").domain
    rep = foliation_report(d, geodesic_battery(d, 50, 0))
    assert rep.ok
    assert rep.min_second_derivative == pytest.approx(2.0, abs=1e-6)
    assert rep.max_critical_points <= 1


def test_hyperbolic_foliation_is_convex():
    d = scenario("poincare_subdisk12").domain
    assert foliation_report(d, geodesic_battery(d, 50, 1)).ok


def test_saddle_foliation_is_rejected():
    d = parse_scenario(SADDLE).domain
    rep = foliation_report(d, geodesic_battery(d, 50, 0), raise_on_violation=False)
    assert not rep.ok and rep.offending is not None
    with pytest.raises(FoliationError):
        foliation_report(d, geodesic_battery(d, 50, 0))


def test_tangent_chord_touches_level_set_once():
    d = scenario("euclidean_disk12").domain
    tr = shoot(d.metric, np.array([0.0, 0.5]), np.array([1.0, 0.0]), (-0.8, 0.8))
    dphi = np.einsum("ij,ij->i", np.asarray(d.grad_phi(tr.x)), tr.v)
    sgn = np.sign(dphi[dphi != 0])
    assert np.count_nonzero(np.diff(sgn)) == 1


def test_chords_end_on_the_boundary():
    d = scenario("ellipse12").domain
    for tr in geodesic_battery(d, 10, 2):
        end = tr.x[-1]
        assert d.rho(end[None])[0] < 0  # overshoots by at most one step
