import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoxray.corner import (CornerSystem, F_normalize, conical_transform,
                            conical_transform_geometric, corner_reduce, derivatives_at_zero,
                            explicit_inverse, recover_values)
from geoxray.errors import DegenerateTileError, DerivativeUnstableError, IllConditionedWarning, PoleError

# cone edges at 45, 90 and 135 degrees: slopes (1, 0, -1)
FAN = CornerSystem.from_angles(np.radians([45, 90, 135]))


def test_slopes_are_decreasing_cotangents():
    assert np.allclose(FAN.alphas, [1.0, 0.0, -1.0], atol=1e-15)
    assert np.allclose(FAN.A, [[1.0, 1.0], [1.0, -1.0]], atol=1e-15)


def test_conical_transform_examples():
    assert conical_transform(FAN, [2, 3], 0.0) == pytest.approx(5.0, abs=1e-14)
    assert conical_transform(FAN, [0, 0], 0.3) == 0.0
    single = CornerSystem.from_angles(np.radians([45, 135]))
    assert conical_transform(single, [1], 0.0) == pytest.approx(2.0, abs=1e-14)


@pytest.mark.parametrize("theta", [-0.4, -0.1, 0.0, 0.2, 0.5])
def test_conical_transform_matches_segment_lengths(theta):
    assert conical_transform(FAN, [2, 3], theta) == pytest.approx(
        conical_transform_geometric(FAN, [2, 3], theta), rel=1e-12)


def test_conical_transform_pole():
    with pytest.raises(PoleError):
        conical_transform(FAN, [2, 3], np.pi / 4)


def test_F_normalize():
    th = np.array([-0.2, 0.0, 0.3])
    t, F = F_normalize(th, np.full(3, 7.0))
    assert np.allclose(F, 7.0 / (1 + t**2))
    t, F = F_normalize([0.0], [4.5])
    assert F[0] == 4.5
    # closed form of the normalised integral at t = 0.1
    tt = 0.1
    z = FAN.alphas / (1 - FAN.alphas * tt)
    _, F = F_normalize([np.arctan(tt)], [conical_transform(FAN, [2, 3], np.arctan(tt))])
    assert F[0] == pytest.approx(2 * (z[0] - z[1]) + 3 * (z[1] - z[2]), abs=1e-10)


def test_derivatives_of_a_polynomial_are_exact():
    t = np.linspace(-0.1, 0.1, 9)
    d = derivatives_at_zero(t, 1 + 2 * t + 3 * t**2, 2)
    assert np.allclose(d.values, [1.0, 2.0, 6.0], atol=1e-10)


def test_derivatives_of_the_conical_example():
    th = np.arctan(np.linspace(-1e-3, 1e-3, 9))
    t, F = F_normalize(th, conical_transform(FAN, [2, 3], th))
    d = derivatives_at_zero(t, F, 1)
    assert np.allclose(d.values, [5.0, -1.0], atol=1e-8)
    noisy = F + 1e-10 * np.random.default_rng(0).standard_normal(9)
    assert np.allclose(derivatives_at_zero(t, noisy, 1).values, [5.0, -1.0], atol=1e-6)


def test_unstable_derivative_is_reported():
    t = np.linspace(-1, 1, 9)
    with pytest.raises(DerivativeUnstableError):
        derivatives_at_zero(t, np.abs(t) ** 0.5, 1, tol=1e-6)


def test_recover_values_examples():
    assert np.allclose(recover_values(FAN, [5.0, -1.0]), [2.0, 3.0], atol=1e-14)
    one = CornerSystem.from_angles(np.radians([30, 120]))
    F0 = 4.0
    assert recover_values(one, [F0])[0] == pytest.approx(F0 / (one.alphas[0] - one.alphas[1]))


def test_condition_numbers():
    assert FAN.condition == pytest.approx(1.0, abs=1e-14)
    assert CornerSystem.from_angles(np.radians([45, 135])).condition == pytest.approx(0.5)
    gaps = [40, 20, 10, 5, 2]
    conds = [CornerSystem.from_angles(np.radians([90 - g, 90, 90 + g, 90 + 2 * g])).condition
             for g in gaps]
    assert all(b > a for a, b in zip(conds, conds[1:]))


def test_ill_conditioned_system_warns():
    cs = CornerSystem.from_angles(np.radians(np.linspace(87, 93, 7)))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        recover_values(cs, np.ones(6))
    assert any(issubclass(x.category, IllConditionedWarning) for x in w)


def test_coincident_edges_raise():
    with pytest.raises(DegenerateTileError):
        CornerSystem.from_angles([1.0, 1.0, 2.0])
    with pytest.raises(ValueError):
        CornerSystem.from_angles([0.0, 1.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=3, max_size=6, unique=True))
def test_explicit_inverse_matches_dense_inverse(fracs):
    th = np.sort(np.radians(15 + 150 * np.asarray(fracs)))
    if np.min(np.diff(th)) < np.radians(5):
        return
    cs = CornerSystem.from_angles(th)
    assert np.allclose(explicit_inverse(cs.alphas) @ cs.A, np.eye(cs.N), atol=1e-8)


def test_mpmath_round_trip_for_six_cones():
    cs = CornerSystem.from_angles(np.radians([20, 45, 70, 95, 120, 140, 165]))
    a = np.array([1.5, -2.0, 3.25, 0.5, -4.0, 2.0])
    n, w = 2 * (cs.N + 1) + 3, 1e-6 / np.max(np.abs(cs.alphas))
    with mp.workdps(50):
        ths = [mp.atan(mp.mpf(w) * mp.cos(mp.pi * (k + mp.mpf(0.5)) / n)) for k in range(n)]
        t, F = F_normalize(ths, conical_transform(cs, a, ths, dps=50))
        d = derivatives_at_zero(t, F, cs.N - 1, dps=50)
    assert np.allclose(recover_values(cs, d.values), a, rtol=1e-8)


def test_corner_reduce_on_a_flat_corner():
    """Straight edges through the vertex: the corner integral is eps times the conical one."""
    th = np.linspace(-0.05, 0.05, 9)
    eps = 1e-2 * 2.0 ** -np.arange(5)
    I_C = np.outer(conical_transform(FAN, [2, 3], th), eps)
    red = corner_reduce(th, eps, I_C, 1)
    assert np.allclose(red.slopes, conical_transform(FAN, [2, 3], th), rtol=1e-10)
    assert np.allclose(recover_values(FAN, red.b_raw), [2, 3], atol=1e-6)
    zero = corner_reduce(th, eps, np.zeros_like(I_C), 1)
    assert np.all(zero.b_raw == 0)
