"""
Tests for the cumulant characteristic-function approximations and their densities.
"""
import math
import time

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import airy

from src.char_fn import (
    CharFnApprox,
    density,
    eval_charfn,
    finite_difference_moment,
    fit_charfn,
    gaussian_density,
    grid_moments,
    invert_charfn,
    make_grid,
)
from src.errors import BadGrid, DataError, InsufficientMoments, NegativeVariance, UsageError, ZeroVariance
from src.price_moments import from_raw_moments


def _raw_moments(a1, a2, a3=0.0):
    """p(1..3) of a distribution with mean a1, variance a2 and third cumulant a3."""
    return (a1, a2 + a1 ** 2, a3 + 3.0 * a1 * a2 + a1 ** 3)


def airy_density(q, variance, third):
    """Exact inverse transform of exp(-v x^2 / 2 - i b x^3) with b = third / 6 > 0."""
    b = third / 6.0
    c = (3.0 * b) ** (-1.0 / 3.0)
    exponent = variance ** 3 / (108.0 * b ** 2) + q * variance / (6.0 * b)
    ai = airy(c * (q + variance ** 2 / (12.0 * b)))[0]
    return c * np.exp(exponent) * ai


def test_fit_charfn_gaussian_example():
    approx = fit_charfn(from_raw_moments((2.5, 7.25)), 2)
    assert approx.coefficients == (2.5, 1.0)


def test_fit_charfn_third_cumulant():
    approx = fit_charfn(from_raw_moments(_raw_moments(1.0, 2.0, 0.75)), 3)
    assert approx.coefficients == pytest.approx((1.0, 2.0, 0.75), rel=1e-12)


def test_fit_charfn_first_order_is_point_mass():
    approx = fit_charfn(from_raw_moments((4.0,)), 1)
    assert approx.coefficients == (4.0,)
    assert eval_charfn(approx, 0.5) == pytest.approx(complex(math.cos(2.0), math.sin(2.0)))


def test_fit_charfn_errors():
    with pytest.raises(UsageError):
        fit_charfn(from_raw_moments((1.0, 2.0, 3.0, 4.0)), 4)
    with pytest.raises(InsufficientMoments):
        fit_charfn(from_raw_moments((1.0, 2.0)), 3)
    with pytest.raises(NegativeVariance):
        fit_charfn(from_raw_moments((2.0, 3.0)), 2)


def test_eval_standard_gaussian():
    approx = CharFnApprox(2, (0.0, 1.0))
    assert eval_charfn(approx, 1.0) == pytest.approx(math.exp(-0.5))
    assert eval_charfn(approx, 0.0) == 1.0
    assert abs(eval_charfn(CharFnApprox(3, (3.0, 2.0, 1.5)), 0.7)) == pytest.approx(math.exp(-0.49))


def test_eval_rejects_non_finite():
    with pytest.raises(DataError):
        eval_charfn(CharFnApprox(2, (0.0, 1.0)), float("nan"))


def test_finite_differences_reproduce_moments():
    rng = np.random.default_rng(99)
    for _ in range(100):
        variance = 10.0 ** rng.uniform(-4.0, 4.0)
        sigma = math.sqrt(variance)
        a1 = rng.uniform(-50.0, 50.0)
        a3 = rng.uniform(-0.5, 0.5) * sigma ** 3
        approx = CharFnApprox(3, (a1, variance, a3))
        expected = _raw_moments(a1, variance, a3)
        scale = abs(a1) + sigma
        for n in (1, 2, 3):
            estimate = finite_difference_moment(approx, n)
            assert abs(estimate - expected[n - 1]) <= 1e-5 * scale ** n


def test_make_grid():
    grid = make_grid(CharFnApprox(2, (10.0, 4.0)))
    assert grid.size == 4097
    assert grid[0] == pytest.approx(-2.0)
    assert grid[-1] == pytest.approx(22.0)
    with pytest.raises(ZeroVariance):
        make_grid(CharFnApprox(2, (1.0, 0.0)))


def test_gaussian_density_requires_variance():
    with pytest.raises(ZeroVariance):
        gaussian_density(CharFnApprox(2, (1.0, 0.0)), [0.0, 1.0])


def test_bad_grid():
    approx = CharFnApprox(2, (0.0, 1.0))
    with pytest.raises(BadGrid):
        invert_charfn(approx, [0.0, 0.0, 1.0])
    with pytest.raises(BadGrid):
        invert_charfn(approx, [])


def test_density_needs_order_two_or_three():
    with pytest.raises(UsageError):
        density(CharFnApprox(1, (1.0,)), [0.0, 1.0])


def test_gaussian_inversion_matches_closed_form():
    approx = CharFnApprox(2, (100.0, 0.25))
    grid = make_grid(approx, 4097, 6.0)
    closed = gaussian_density(approx, grid)
    inverted = invert_charfn(approx, grid)
    assert np.max(np.abs(inverted.density - closed.density)) <= 1e-6
    assert abs(closed.mass - 1.0) <= 1e-6
    assert abs(inverted.mass - 1.0) <= 1e-6
    assert inverted.clipped_mass == 0.0


def test_gaussian_inversion_runtime():
    approx = CharFnApprox(2, (0.0, 1.0))
    grid = make_grid(approx)
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        invert_charfn(approx, grid)
        best = min(best, time.perf_counter() - start)
    assert best < 0.1


def test_inversion_on_non_uniform_grid():
    approx = CharFnApprox(2, (0.0, 1.0))
    grid = np.array([-2.0, -0.5, 0.0, 0.3, 1.7])
    inverted = invert_charfn(approx, grid)
    assert_allclose(inverted.density, gaussian_density(approx, grid).density, atol=1e-8)


def test_third_order_without_skew_matches_gaussian():
    gaussian = CharFnApprox(2, (5.0, 2.0))
    skewless = CharFnApprox(3, (5.0, 2.0, 0.0))
    grid = make_grid(gaussian)
    diff = density(skewless, grid).density - density(gaussian, grid).density
    assert np.max(np.abs(diff)) <= 1e-6


def test_third_order_matches_airy_closed_form():
    variance, third = 1.0, 0.3
    approx = CharFnApprox(3, (0.0, variance, third))
    grid = make_grid(CharFnApprox(2, (0.0, variance)), 4097, 6.0)
    inverted = invert_charfn(approx, grid)
    assert np.max(np.abs(inverted.raw_density - airy_density(grid, variance, third))) <= 1e-6


def test_third_order_clips_negative_lobes():
    approx = CharFnApprox(3, (0.0, 1.0, 0.5))
    grid = make_grid(CharFnApprox(2, (0.0, 1.0)), 4097, 6.0)
    result = invert_charfn(approx, grid)
    assert np.min(result.raw_density) < 0
    assert np.min(result.density) >= 0
    assert 0 < result.clipped_mass < 0.01
    assert result.mass == pytest.approx(1.0, abs=1e-9)
    assert result.raw_mass == pytest.approx(1.0, abs=1e-3)


def test_third_order_grid_moments_reproduce_price_moments():
    a1, variance, third = 10.0, 1.0, 0.5
    approx = CharFnApprox(3, (a1, variance, third))
    grid = make_grid(CharFnApprox(2, (a1, variance)), 4097, 8.0)
    result = invert_charfn(approx, grid)
    moments = grid_moments(result, 3, raw=True)
    expected = _raw_moments(a1, variance, third)
    for got, want in zip(moments, expected):
        assert got == pytest.approx(want, rel=1e-3)


def test_density_dispatch_uses_closed_form_for_gaussian():
    approx = CharFnApprox(2, (1.0, 1.0))
    grid = make_grid(approx, 101, 4.0)
    result = density(approx, grid)
    assert result.quadrature_error == 0.0
    assert_allclose(result.density, result.raw_density)
