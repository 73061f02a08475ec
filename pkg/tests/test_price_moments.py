"""
Tests for moment-based and frequency-based price statistics.
"""
from pathlib import Path

import numpy as np
import pytest

from src.errors import BadBins, DegenerateVolume, EmptyWindow
from src.ingest import parse_tape
from src.power_sums import TradeMoments, accumulate, to_moments
from src.price_moments import (
    Binning,
    frequency_distribution,
    frequency_price_stats,
    frequency_raw_moments,
    frequency_value_volume_stats,
    from_raw_moments,
    moment_gap,
    power_correlations,
    price_moments_from_trades,
    price_volume_correlation,
    vwap,
    window_price_moments,
)
from src.trade_model import WindowedTrades, make_tick, select_window, window_of

FIXTURES = Path(__file__).parent / "fixtures"


def _window(prices, volumes):
    ticks = tuple(make_tick(i, float(p), float(u)) for i, (p, u) in enumerate(zip(prices, volumes)))
    return WindowedTrades(window_of(0, max(len(ticks), 1)), ticks)


@pytest.fixture
def two_tick():
    ticks = parse_tape((FIXTURES / "two_tick.csv").read_bytes())
    return select_window(ticks, window_of(0, 10_000_000_000))


def test_two_tick_vwap_and_frequency_mean(two_tick):
    stats = window_price_moments(two_tick, n_max=2)
    assert stats.p[0] == 2.5
    assert stats.p[1] == pytest.approx(8.2)
    assert stats.variance == pytest.approx(1.95)
    assert vwap(two_tick) == 2.5
    assert frequency_price_stats(two_tick).mean == 2.0


def test_single_tick_has_zero_variance():
    stats = window_price_moments(_window([4.0], [2.0]), n_max=4)
    assert stats.mean == 4.0
    assert stats.variance == 0.0
    assert stats.skewness == 0.0
    assert stats.excess_kurtosis == 0.0


def test_constant_price_fixture():
    ticks = parse_tape((FIXTURES / "constant_price.csv").read_bytes())
    window = select_window(ticks, window_of(0, 10_000_000_000))
    stats = window_price_moments(window)
    assert stats.mean == 5.5
    assert stats.variance == 0.0
    assert stats.consistent


def test_skewness_and_kurtosis_of_known_distribution():
    # Constant volume: moments are those of the equal-weight sample.
    prices = [1.0, 2.0, 2.0, 3.0, 7.0]
    stats = window_price_moments(_window(prices, [1.0] * 5))
    x = np.array(prices)
    centered = x - x.mean()
    variance = np.mean(centered ** 2)
    assert stats.variance == pytest.approx(variance, rel=1e-12)
    assert stats.skewness == pytest.approx(np.mean(centered ** 3) / variance ** 1.5, rel=1e-10)
    assert stats.excess_kurtosis == pytest.approx(np.mean(centered ** 4) / variance ** 2 - 3.0, rel=1e-10)


def test_correlated_powers_give_inconsistent_moments():
    stats = window_price_moments(_window([1.0, 10.0], [10.0, 1.0]), n_max=3)
    assert not stats.consistent
    assert stats.raw_variance < 0
    assert stats.variance == 0.0
    assert stats.variance_clamped
    assert stats.skewness is None


def test_rounding_level_negative_variance_is_clamped():
    stats = from_raw_moments([1.0, 1.0 - 1e-15])
    assert stats.consistent
    assert stats.variance == 0.0
    assert stats.variance_clamped


def test_degenerate_volume():
    moments = TradeMoments(n_max=2, count=1, value_moments=(1.0, 1.0), volume_moments=(1.0, 0.0))
    with pytest.raises(DegenerateVolume):
        price_moments_from_trades(moments)


def test_empty_window_errors():
    empty = _window([], [])
    with pytest.raises(EmptyWindow):
        vwap(empty)
    with pytest.raises(EmptyWindow):
        frequency_price_stats(empty)


def test_vwap_coincides_with_first_moment():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        window = _window(np.exp(rng.normal(2.0, 1.0, n)), np.exp(rng.normal(0.0, 2.0, n)))
        p1 = window_price_moments(window, n_max=1).p[0]
        assert abs(vwap(window) - p1) / p1 <= 1e-12


def test_price_scaling():
    rng = np.random.default_rng(5)
    prices = np.exp(rng.normal(0.0, 1.0, 200))
    volumes = np.exp(rng.normal(0.0, 0.5, 200))
    base = window_price_moments(_window(prices, volumes))
    scale = 3.7
    scaled = window_price_moments(_window(prices * scale, volumes))
    for n, (a, b) in enumerate(zip(base.p, scaled.p), start=1):
        assert b == pytest.approx(scale ** n * a, rel=1e-12)
    assert scaled.skewness == pytest.approx(base.skewness, rel=1e-12)


def test_volume_scaling():
    rng = np.random.default_rng(6)
    prices = np.exp(rng.normal(0.0, 1.0, 200))
    volumes = np.exp(rng.normal(0.0, 0.5, 200))
    base = window_price_moments(_window(prices, volumes))
    scaled = window_price_moments(_window(prices, volumes * 250.0))
    for a, b in zip(base.p, scaled.p):
        assert b == pytest.approx(a, rel=1e-12)


def test_frequency_distribution_exact_levels():
    dist = frequency_distribution(np.array([3.0, 1.0, 3.0, 3.0]))
    assert dist.levels == (1.0, 3.0)
    assert dist.probabilities == (0.25, 0.75)
    assert dist.counts == (1, 3)


def test_frequency_distribution_fixed_width():
    dist = frequency_distribution(np.array([1.0, 3.0]), Binning.fixed_width(2.0))
    assert dist.bin_edges == (0.0, 2.0, 4.0)
    assert dist.counts == (1, 1)
    assert dist.levels == (1.0, 3.0)


def test_explicit_edges_must_cover():
    with pytest.raises(BadBins):
        frequency_distribution(np.array([1.0, 5.0]), Binning.explicit([0.0, 2.0, 4.0]))
    with pytest.raises(BadBins):
        Binning.explicit([1.0, 1.0])
    with pytest.raises(BadBins):
        Binning.fixed_width(0.0)


def test_frequency_raw_moments():
    window = _window([1.0, 3.0], [1.0, 3.0])
    assert frequency_raw_moments(window, 3) == (2.0, 5.0, 14.0)


def test_moment_gap_two_tick(two_tick):
    gap, se = moment_gap(two_tick, 1)
    assert gap == 0.5
    assert se == 0.0


def test_moment_gap_matches_difference():
    rng = np.random.default_rng(8)
    prices = np.exp(rng.normal(1.0, 0.3, 500))
    volumes = np.exp(rng.normal(0.0, 1.0, 500))
    window = _window(prices, volumes)
    stats = window_price_moments(window, n_max=2)
    frequency = frequency_raw_moments(window, 2)
    for n in (1, 2):
        gap, se = moment_gap(window, n)
        assert gap == pytest.approx(stats.p[n - 1] - frequency[n - 1], rel=1e-9, abs=1e-12)
        assert se > 0


def test_power_correlations_shape_and_constant_volume():
    window = _window([1.0, 2.0, 4.0], [1.0, 1.0, 1.0])
    matrix = power_correlations(window, 3)
    assert len(matrix) == 3 and all(len(row) == 3 for row in matrix)
    assert all(entry is None for row in matrix for entry in row)
    assert price_volume_correlation(window) is None


def test_price_volume_correlation_sign():
    window = _window([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert price_volume_correlation(window) == pytest.approx(1.0)
    assert power_correlations(window, 1)[0][0] == pytest.approx(1.0)


def test_symmetric_prices_have_no_skew():
    stats = window_price_moments(_window([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]), n_max=3)
    assert stats.mean == pytest.approx(2.0)
    assert stats.skewness == pytest.approx(0.0, abs=1e-12)


def test_value_and_volume_distributions(two_tick):
    values, volumes = frequency_value_volume_stats(two_tick)
    assert values.levels == (1.0, 9.0)
    assert volumes.levels == (1.0, 3.0)
    assert volumes.probabilities == (0.5, 0.5)


def test_small_positive_variance_at_high_prices_is_kept():
    stats = window_price_moments(_window([700000.0, 700001.0], [1.0, 1.0]), n_max=2)
    assert stats.raw_variance == 0.25
    assert stats.variance == 0.25
    assert not stats.variance_clamped
    assert stats.consistent
