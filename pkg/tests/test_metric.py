import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoxray.metric import euclidean, poincare_disk
from geoxray.scenario import build_metric

coord = st.floats(-0.6, 0.6)


def fd_christoffel(m, p, h=1e-5):
    """Christoffel symbols from central differences of the metric tensor."""
    dg = np.stack([(m.metric_at(p + h * e) - m.metric_at(p - h * e)) / (2 * h)
                   for e in np.eye(2)])  # dg[c, a, b] = d_c g_ab
    gi = np.linalg.inv(m.metric_at(p))
    G = np.empty((2, 2, 2))
    for k in range(2):
        for i in range(2):
            for j in range(2):
                G[k, i, j] = 0.5 * sum(gi[k, l] * (dg[i, l, j] + dg[j, l, i] - dg[l, i, j])
                                       for l in range(2))
    return G


def test_euclidean_metric_is_identity():
    assert np.array_equal(euclidean().metric_at(np.array([0.3, -0.7])), np.eye(2))


def test_poincare_metric_at_origin():
    assert np.allclose(poincare_disk().metric_at(np.zeros(2)), 4 * np.eye(2), atol=1e-14)


def test_general_metric_direct_evaluation():
    m = build_metric({"kind": "general", "g11": "1 + x**2", "g12": "0", "g22": "1",
                      "chart": [-3, 3, -3, 3]})
    assert np.allclose(m.metric_at(np.array([1.0, 0.0])), np.diag([2.0, 1.0]), atol=1e-14)


def test_conformal_metric_from_expression_matches_poincare():
    m = build_metric({"kind": "conformal", "lam": "log(2/(1 - x**2 - y**2))",
                      "chart": [-0.7, 0.7, -0.7, 0.7]})
    p = np.array([0.3, -0.2])
    assert np.allclose(m.metric_at(p), poincare_disk().metric_at(p), rtol=1e-12)


def test_christoffel_zero_where_expected():
    assert np.allclose(euclidean().christoffel(np.array([0.4, 0.1])), 0.0)
    assert np.allclose(poincare_disk().christoffel(np.zeros(2)), 0.0, atol=1e-12)


@pytest.mark.parametrize("p", [(0.5, 0.0), (0.2, -0.3)])
def test_christoffel_matches_finite_differences(p):
    m = poincare_disk()
    p = np.array(p)
    assert np.allclose(m.christoffel(p), fd_christoffel(m, p), atol=1e-6)


def test_general_christoffel_matches_finite_differences():
    m = build_metric({"kind": "general", "g11": "1 + x**2", "g12": "x*y/5", "g22": "1 + y**2",
                      "chart": [-2, 2, -2, 2]})
    p = np.array([0.4, 0.7])
    assert np.allclose(m.christoffel(p), fd_christoffel(m, p), atol=1e-6)


def test_gauss_curvature():
    assert euclidean().gauss_curvature(np.array([0.1, 0.2])) == pytest.approx(0.0, abs=1e-12)
    assert poincare_disk().gauss_curvature(np.array([0.3, 0.2])) == pytest.approx(-1.0, abs=1e-6)
    m = build_metric({"kind": "general", "g11": "1", "g12": "0", "g22": "exp(2*x)",
                      "chart": [-2, 2, -2, 2]})
    for p in ([0.0, 0.0], [0.7, -1.1]):
        assert m.gauss_curvature(np.array(p)) == pytest.approx(-1.0, abs=1e-6)


@settings(max_examples=50, deadline=None)
@given(coord, coord, st.floats(0, 2 * np.pi), st.floats(0.1, 3))
def test_rot90_is_a_g_rotation(x, y, ang, r):
    m = poincare_disk()
    p = np.array([x, y])
    v = r * np.array([np.cos(ang), np.sin(ang)])
    w = m.rot90(p, v)
    assert m.inner(p, v, w) == pytest.approx(0.0, abs=1e-10 * r * r)
    assert m.norm(p, w) == pytest.approx(m.norm(p, v), rel=1e-12)
    # positively oriented
    assert v[0] * w[1] - v[1] * w[0] > 0


@settings(max_examples=50, deadline=None)
@given(coord, coord, st.floats(0, 2 * np.pi))
def test_normalize_gives_unit_g_length(x, y, ang):
    m = poincare_disk()
    p = np.array([x, y])
    u = m.normalize(p, np.array([np.cos(ang), np.sin(ang)]))
    assert m.norm(p, u) == pytest.approx(1.0, rel=1e-13)


def test_points_outside_chart_are_flagged():
    m = poincare_disk()
    assert not m.in_chart(np.array([0.69, 0.71]))
    assert m.in_chart(np.array([0.0, 0.0]))
