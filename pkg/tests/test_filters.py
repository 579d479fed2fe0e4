import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.signal import savgol_coeffs

from cowgait.filters import (
    FilterParams, correct_trajectories, mad_correct, savgol_smooth, second_derivative, uniform_filter,
)
from cowgait.trajectory import TrajectorySet

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_mad_spike():
    out, n = mad_correct([0, 0, 100, 0, 0], 3, 3, 5)
    np.testing.assert_array_equal(out, [0, 0, 0, 0, 0])
    assert n == 1


def test_mad_constant_and_ramp():
    out, n = mad_correct(np.full(7, 3.0), 3, 3, 5)
    np.testing.assert_array_equal(out, 3.0)
    assert n == 0
    ramp = [0, 10, 20, 30]
    out, n = mad_correct(ramp, 3, 3, 5)
    np.testing.assert_array_equal(out, ramp)
    assert n == 0


def test_mad_window_checks():
    with pytest.raises(ValueError, match="window exceeds series"):
        mad_correct([1, 2], 3)
    with pytest.raises(ValueError):
        mad_correct([1, 2, 3, 4], 4)


def test_mad_default_floor():
    assert FilterParams().mad_floor_px == 10.0
    # a 8 px blip survives the default floor but not a 5 px one
    assert mad_correct([0, 0, 8, 0, 0])[1] == 0
    assert mad_correct([0, 0, 8, 0, 0], floor=5)[1] == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(8, 60), st.floats(-50, 50), st.floats(-2, 2), st.data())
def test_mad_idempotent_once_outliers_replaced(n, c, slope, data):
    base = c + slope * np.arange(n)
    spikes = data.draw(st.sets(st.integers(1, n - 2), max_size=n // 4))
    s = base.copy()
    last = -10
    placed = 0
    for i in sorted(spikes):
        if i - last >= 3:  # isolated spikes only
            s[i] += data.draw(st.sampled_from([-1, 1])) * data.draw(st.floats(20, 500))
            last = i
            placed += 1
    once, n1 = mad_correct(s, 3, 3, 5)
    assert n1 == placed
    # each spike becomes its window median, i.e. a clean neighbour value
    expect = base.copy()
    for i in np.flatnonzero(s != base):
        expect[i] = np.median(s[i - 1:i + 2])
    np.testing.assert_allclose(once, expect, atol=1e-9)
    twice, n2 = mad_correct(once, 3, 3, 5)
    assert n2 == 0
    np.testing.assert_array_equal(twice, once)


def test_sg_matches_reference_coefficients():
    rng = np.random.default_rng(0)
    s = rng.normal(size=60)
    out = savgol_smooth(s, 10, 3)
    # reference weights evaluated at sample position 4 of a 10-sample window
    w = savgol_coeffs(10, 3, pos=4, use="dot")
    ref = np.lib.stride_tricks.sliding_window_view(s, 10) @ w
    np.testing.assert_allclose(out[4:60 - 5], ref, atol=1e-12)
    w11 = savgol_coeffs(11, 3, use="dot")
    ref11 = np.lib.stride_tricks.sliding_window_view(s, 11) @ w11
    np.testing.assert_allclose(savgol_smooth(s, 11, 3)[5:-5], ref11, atol=1e-12)


def test_sg_cubic_reproduction_window11():
    t = np.arange(40, dtype=float)
    s = 0.01 * t ** 3 - 0.5 * t ** 2 + 3 * t - 7
    np.testing.assert_allclose(savgol_smooth(s, 11, 3), s, atol=1e-9 * np.abs(s).max())


def test_sg_constant_and_impulse():
    np.testing.assert_allclose(savgol_smooth(np.full(12, 4.2), 10, 3), 4.2)
    out = savgol_smooth([0, 0, 0, 1, 0, 0, 0], 5, 1)
    assert out[3] == pytest.approx(0.2)


def test_sg_short_series():
    with pytest.raises(ValueError):
        savgol_smooth(np.arange(5.0), 10, 3)


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=12, max_size=40), st.floats(-1e3, 1e3))
def test_filters_translation_equivariant(values, c):
    s = np.array(values)
    np.testing.assert_allclose(savgol_smooth(s + c, 10, 3), savgol_smooth(s, 10, 3) + c, atol=1e-6)
    np.testing.assert_allclose(mad_correct(s + c)[0], mad_correct(s)[0] + c, atol=1e-6)
    np.testing.assert_allclose(uniform_filter(s + c, 3), uniform_filter(s, 3) + c, atol=1e-6)


def test_second_derivative():
    i = np.arange(8, dtype=float)
    np.testing.assert_allclose(second_derivative(i ** 2), 2.0)
    np.testing.assert_allclose(second_derivative(3 * i + 1), 0.0)
    np.testing.assert_allclose(second_derivative([0, 0, 4, 0, 0])[1:-1], [4, -8, 4])
    with pytest.raises(ValueError):
        second_derivative([1, 2])


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100), st.floats(-100, 100), st.integers(3, 50))
def test_second_derivative_affine_zero(a, b, n):
    np.testing.assert_allclose(second_derivative(a * np.arange(n) + b), 0.0, atol=1e-9)


def test_uniform_filter():
    s = np.array([1.0, 5.0, 2.0])
    np.testing.assert_array_equal(uniform_filter(s, 1), s)
    np.testing.assert_allclose(uniform_filter([0, 3, 0], 3), [1.5, 1, 1.5])
    np.testing.assert_allclose(uniform_filter(np.full(6, 2.0), 3), 2.0)


def _smooth_traj(n=53):
    t = np.arange(n, dtype=float)
    coords = np.empty((n, 9, 2))
    for k in range(9):
        coords[:, k, 0] = 100 + 50 * k + 3.0 * t
        coords[:, k, 1] = 400 + 10 * np.sin(2 * np.pi * t / 36 + k)
    return TrajectorySet("v", "c", coords)


def test_correct_trajectories_one_jump():
    t = _smooth_traj()
    c = np.array(t.coords)
    c[20, 4, 1] += 100.0
    _, frac = correct_trajectories(t.replace(coords=c))
    assert frac == pytest.approx(1 / (53 * 9))


def test_correct_trajectories_clean_and_constant():
    _, frac = correct_trajectories(_smooth_traj())
    assert frac == 0
    const = TrajectorySet("v", "c", np.full((20, 9, 2), 7.0))
    out, frac = correct_trajectories(const)
    assert frac == 0
    np.testing.assert_allclose(out.coords, 7.0)
