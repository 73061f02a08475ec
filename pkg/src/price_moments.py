"""
Price statistical moments from trade moments, and the frequency-based
alternatives they are compared with.

The moment-based price moments are p(n) = C_m(n) / U_m(n); p(1) is the VWAP.
The frequency-based statistics weight every trade equally.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.errors import BadBins, DataError, DegenerateVolume, EmptyWindow
from src.power_sums import DEFAULT_NMAX, TradeMoments, accumulate, check_nmax, to_moments
from src.trade_model import WindowedTrades

logger = logging.getLogger(__name__)

# Relative slack on p(2) - p(1)**2 before a negative variance is genuine.
VARIANCE_EPSILON = 1e-12


@dataclass(frozen=True)
class PriceMoments:
    """
    Moment-based price statistics of one window.

    `raw_variance` is p(2) - p(1)**2 before clamping. `consistent` is False
    when it is negative beyond rounding, which happens when price and volume
    powers correlate inside the window; variance is then reported as 0 and
    the shape statistics are absent.
    """

    n_max: int
    p: Tuple[float, ...]
    mean: float
    variance: float
    raw_variance: float
    variance_clamped: bool
    consistent: bool
    skewness: Optional[float] = None
    excess_kurtosis: Optional[float] = None

    @property
    def volatility(self) -> float:
        """sigma(p), the square root of the variance."""
        return math.sqrt(self.variance)

    @property
    def third_cumulant(self) -> Optional[float]:
        if self.n_max < 3:
            return None
        p1, p2, p3 = self.p[:3]
        return p3 - 3.0 * p2 * p1 + 2.0 * p1 ** 3


def central_moment(p: Sequence[float], order: int) -> float:
    """Central moment E[(x - p(1))**order] from raw moments p(1..order)."""
    p1 = p[0]
    raw = [1.0] + list(p[:order])
    total = 0.0
    for j in range(order + 1):
        total += math.comb(order, j) * raw[j] * (-p1) ** (order - j)
    return total


def shape_statistics(p: Sequence[float], n_max: int):
    """
    Variance, clamp flags, skewness and excess kurtosis from raw moments.

    Returns:
        Tuple (variance, raw_variance, clamped, consistent, skewness, kurtosis)
    """
    p1 = p[0]
    if n_max < 2:
        return 0.0, 0.0, False, True, None, None

    p2 = p[1]
    raw_variance = p2 - p1 * p1
    tolerance = VARIANCE_EPSILON * abs(p2)
    consistent = raw_variance >= -tolerance
    # Positive variances stand however small; only negatives clamp.
    clamped = raw_variance < 0.0
    variance = max(raw_variance, 0.0)

    skewness = None
    kurtosis = None
    if n_max >= 3 and consistent:
        third = p[2] - 3.0 * p2 * p1 + 2.0 * p1 ** 3
        skewness = third / variance ** 1.5 if variance > 0 else 0.0
    if n_max >= 4 and consistent:
        fourth = central_moment(p, 4)
        kurtosis = fourth / variance ** 2 - 3.0 if variance > 0 else 0.0
    return variance, raw_variance, clamped, consistent, skewness, kurtosis


def from_raw_moments(p: Sequence[float]) -> PriceMoments:
    """Price statistics from raw price moments p(1..n_max)."""
    p = tuple(float(v) for v in p)
    if not p:
        raise DataError("at least one raw moment is required")
    n_max = check_nmax(len(p))
    variance, raw_variance, clamped, consistent, skewness, kurtosis = shape_statistics(p, n_max)
    if not consistent:
        logger.warning(
            "p(2) - p(1)^2 = %.6g is negative beyond rounding; price and volume powers correlate",
            raw_variance,
        )
    elif clamped:
        logger.debug("Clamped rounding-level negative variance %.3g to zero", raw_variance)
    return PriceMoments(
        n_max=n_max,
        p=p,
        mean=p[0],
        variance=variance,
        raw_variance=raw_variance,
        variance_clamped=clamped,
        consistent=consistent,
        skewness=skewness,
        excess_kurtosis=kurtosis,
    )


def price_moments_from_trades(moments: TradeMoments) -> PriceMoments:
    """
    Price moments p(n) = C_m(n) / U_m(n) and the derived statistics.

    Args:
        moments: Trade value and volume moments of a window

    Returns:
        PriceMoments; skewness needs n_max >= 3, kurtosis n_max >= 4

    Raises:
        DegenerateVolume: some U_m(n) is zero
    """
    for n, u in enumerate(moments.volume_moments, start=1):
        if not u > 0:
            raise DegenerateVolume(f"volume moment U_m({n}) is {u!r}")
    return from_raw_moments(
        c / u for c, u in zip(moments.value_moments, moments.volume_moments)
    )


def window_price_moments(window: WindowedTrades, n_max: int = DEFAULT_NMAX) -> PriceMoments:
    """Convenience: accumulate, normalise and derive price moments of a window."""
    return price_moments_from_trades(to_moments(accumulate(window, n_max)))


def vwap(window: WindowedTrades) -> float:
    """
    Volume weighted average price sum(C_i) / sum(U_i).

    Raises:
        EmptyWindow: the window holds no trades
    """
    if window.count == 0:
        raise EmptyWindow()
    return math.fsum(window.values()) / math.fsum(window.volumes())


@dataclass(frozen=True)
class Binning:
    """
    How observations are grouped into levels.

    kind "exact" groups identical values; "width" uses bins of a fixed width
    aligned to multiples of the width; "edges" uses explicit edges, the last
    bin closed on the right.
    """

    kind: str = "exact"
    width: Optional[float] = None
    edges: Optional[Tuple[float, ...]] = None

    @classmethod
    def exact(cls) -> "Binning":
        return cls("exact")

    @classmethod
    def fixed_width(cls, width: float) -> "Binning":
        if not (math.isfinite(width) and width > 0):
            raise BadBins(f"bin width must be positive, got {width!r}")
        return cls("width", width=float(width))

    @classmethod
    def explicit(cls, edges: Sequence[float]) -> "Binning":
        edges = tuple(float(e) for e in edges)
        if len(edges) < 2:
            raise BadBins("at least two bin edges are required")
        if any(not math.isfinite(e) for e in edges) or any(b <= a for a, b in zip(edges, edges[1:])):
            raise BadBins("bin edges must be finite and strictly increasing")
        return cls("edges", edges=edges)


@dataclass(frozen=True)
class FrequencyDistribution:
    """
    Trade-count probabilities f_k = m_k / N.

    For exact binning `bin_edges` holds the K observed levels; otherwise it
    holds K + 1 edges.
    """

    bin_edges: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    counts: Tuple[int, ...]
    total: int
    exact: bool

    @property
    def levels(self) -> Tuple[float, ...]:
        """Representative value of every bin: the level or the bin midpoint."""
        if self.exact:
            return self.bin_edges
        return tuple((a + b) / 2.0 for a, b in zip(self.bin_edges, self.bin_edges[1:]))


@dataclass(frozen=True)
class FrequencyPriceStats:
    distribution: FrequencyDistribution
    mean: float


def frequency_distribution(series: np.ndarray, bins: Optional[Binning] = None) -> FrequencyDistribution:
    """
    Count-based distribution of a series.

    Raises:
        EmptyWindow: the series is empty
        BadBins: explicit edges do not cover every observation
    """
    bins = bins or Binning.exact()
    series = np.asarray(series, dtype=float)
    total = int(series.size)
    if total == 0:
        raise EmptyWindow()

    if bins.kind == "exact":
        levels, counts = np.unique(series, return_counts=True)
        edges = levels
        exact = True
    else:
        if bins.kind == "width":
            low = math.floor(series.min() / bins.width)
            high = math.floor(series.max() / bins.width) + 1
            edges = np.arange(low, high + 1, dtype=float) * bins.width
        elif bins.kind == "edges":
            edges = np.asarray(bins.edges, dtype=float)
            if series.min() < edges[0] or series.max() > edges[-1]:
                raise BadBins(
                    f"bin edges [{edges[0]}, {edges[-1]}] do not cover observations "
                    f"[{series.min()}, {series.max()}]"
                )
        else:
            raise BadBins(f"unknown binning kind {bins.kind!r}")
        counts, edges = np.histogram(series, bins=edges)
        exact = False

    counts = tuple(int(c) for c in counts)
    return FrequencyDistribution(
        bin_edges=tuple(float(e) for e in edges),
        probabilities=tuple(c / total for c in counts),
        counts=counts,
        total=total,
        exact=exact,
    )


def frequency_price_stats(window: WindowedTrades, bins: Optional[Binning] = None) -> FrequencyPriceStats:
    """
    Frequency-based price distribution f(p_k) = m(p_k)/N and mean E[p].

    The mean is computed from the raw ticks and does not depend on binning.
    """
    if window.count == 0:
        raise EmptyWindow()
    prices = window.prices()
    distribution = frequency_distribution(prices, bins)
    return FrequencyPriceStats(distribution, math.fsum(prices) / window.count)


def frequency_value_volume_stats(
    window: WindowedTrades,
    bins: Optional[Binning] = None,
) -> Tuple[FrequencyDistribution, FrequencyDistribution]:
    """Frequency distributions of trade value and trade volume."""
    if window.count == 0:
        raise EmptyWindow()
    return (
        frequency_distribution(window.values(), bins),
        frequency_distribution(window.volumes(), bins),
    )


def frequency_raw_moments(window: WindowedTrades, n_max: int = DEFAULT_NMAX) -> Tuple[float, ...]:
    """Equal-weight raw price moments (1/N) sum p_i**n, n = 1..n_max."""
    n_max = check_nmax(n_max)
    if window.count == 0:
        raise EmptyWindow()
    prices = window.prices()
    moments = []
    power = prices.copy()
    for n in range(1, n_max + 1):
        moments.append(math.fsum(power) / window.count)
        power = power * prices
    return tuple(moments)


def _safe_corr(x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if x.size < 2 or np.std(x) == 0 or np.std(y) == 0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def power_correlations(window: WindowedTrades, n_max: int = DEFAULT_NMAX) -> List[List[Optional[float]]]:
    """
    Sample correlations corr(p**n, U**k) for n, k = 1..n_max.

    The diagonal probes the uncorrelatedness assumed when reading p(n) as a
    price moment; off-diagonal entries may legitimately differ from zero.
    Entries are None where a series is constant.
    """
    n_max = check_nmax(n_max)
    if window.count == 0:
        raise EmptyWindow()
    prices = window.prices()
    volumes = window.volumes()
    matrix = []
    for n in range(1, n_max + 1):
        row = []
        for k in range(1, n_max + 1):
            row.append(_safe_corr(prices ** n, volumes ** k))
        matrix.append(row)
    return matrix


def price_volume_correlation(window: WindowedTrades) -> Optional[float]:
    """Sample correlation of price and volume; None if either is constant."""
    if window.count == 0:
        raise EmptyWindow()
    return _safe_corr(window.prices(), window.volumes())


def moment_gap(window: WindowedTrades, n: int = 1) -> Tuple[float, float]:
    """
    Gap between the moment-based and the frequency-based n-th price moment.

    p(n) - (1/N) sum p_i**n equals the mean of
    d_i = (p_i**n - m) * (U_i**n / mean(U**n) - 1) for any constant m; m is
    taken as the frequency moment. The standard error is std(d) / sqrt(N).

    Returns:
        Tuple (gap, standard_error)
    """
    n = check_nmax(n)
    if window.count == 0:
        raise EmptyWindow()
    prices = window.prices()
    volumes = window.volumes()
    price_pow = prices ** n
    volume_pow = volumes ** n
    frequency = math.fsum(price_pow) / window.count
    weights = volume_pow / (math.fsum(volume_pow) / window.count)
    d = (price_pow - frequency) * (weights - 1.0)
    gap = math.fsum(d) / window.count
    if window.count < 2:
        return gap, 0.0
    return gap, float(np.std(d, ddof=1) / math.sqrt(window.count))

