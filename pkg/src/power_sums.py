"""
Sums of n-th powers of trade values and volumes over a window.

C(n) = sum_i value_i ** n and U(n) = sum_i volume_i ** n for n = 1..n_max.
Each chunk of ticks is summed with math.fsum (correctly rounded) and folded
into a double-double running total, so streaming, batch and merged results
agree to a few ulps and are exact on integer-valued data.
"""
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from src.errors import DataError, EmptyWindow, Overflow
from src.trade_model import TradeTick, WindowedTrades

logger = logging.getLogger(__name__)

DEFAULT_NMAX = 4
MAX_NMAX = 16


def _two_sum(a: float, b: float) -> Tuple[float, float]:
    """Error-free transformation: a + b == s + err exactly."""
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def check_nmax(n_max: int) -> int:
    if isinstance(n_max, bool) or not isinstance(n_max, (int, np.integer)):
        raise DataError(f"n_max must be an integer, got {n_max!r}")
    if not 1 <= n_max <= MAX_NMAX:
        raise DataError(f"n_max must be between 1 and {MAX_NMAX}, got {n_max}")
    return int(n_max)


@dataclass(frozen=True)
class PowerSums:
    """
    C(1..n_max) and U(1..n_max) over `count` trades.

    Totals are kept as (hi, lo) pairs; value_sums and volume_sums expose
    hi + lo.
    """

    n_max: int
    count: int
    value_hi: Tuple[float, ...]
    value_lo: Tuple[float, ...]
    volume_hi: Tuple[float, ...]
    volume_lo: Tuple[float, ...]

    @classmethod
    def zero(cls, n_max: int = DEFAULT_NMAX) -> "PowerSums":
        n_max = check_nmax(n_max)
        zeros = (0.0,) * n_max
        return cls(n_max, 0, zeros, zeros, zeros, zeros)

    @property
    def value_sums(self) -> Tuple[float, ...]:
        return tuple(h + l for h, l in zip(self.value_hi, self.value_lo))

    @property
    def volume_sums(self) -> Tuple[float, ...]:
        return tuple(h + l for h, l in zip(self.volume_hi, self.volume_lo))

    def value_sum(self, n: int) -> float:
        """C(n), 1-based."""
        return self.value_hi[n - 1] + self.value_lo[n - 1]

    def volume_sum(self, n: int) -> float:
        """U(n), 1-based."""
        return self.volume_hi[n - 1] + self.volume_lo[n - 1]

    def __add__(self, other: "PowerSums") -> "PowerSums":
        return merge(self, other)


@dataclass(frozen=True)
class TradeMoments:
    """C_m(n) = C(n)/N and U_m(n) = U(n)/N."""

    n_max: int
    count: int
    value_moments: Tuple[float, ...]
    volume_moments: Tuple[float, ...]


def merge(a: PowerSums, b: PowerSums) -> PowerSums:
    """
    Combine the sums of two disjoint sets of trades.

    Associative and commutative up to the final rounding of hi + lo; exact
    when all partial sums are representable.
    """
    if a.n_max != b.n_max:
        raise DataError(f"cannot merge power sums of orders {a.n_max} and {b.n_max}")

    def fold(hi_a, lo_a, hi_b, lo_b):
        hi, lo = [], []
        for ha, la, hb, lb in zip(hi_a, lo_a, hi_b, lo_b):
            s, err = _two_sum(ha, hb)
            hi.append(s)
            lo.append(la + lb + err)
        return tuple(hi), tuple(lo)

    value_hi, value_lo = fold(a.value_hi, a.value_lo, b.value_hi, b.value_lo)
    volume_hi, volume_lo = fold(a.volume_hi, a.volume_lo, b.volume_hi, b.volume_lo)
    result = PowerSums(a.n_max, a.count + b.count, value_hi, value_lo, volume_hi, volume_lo)
    _check_finite(result)
    return result


def _check_finite(sums: PowerSums) -> None:
    for n in range(1, sums.n_max + 1):
        if not (math.isfinite(sums.value_sum(n)) and math.isfinite(sums.volume_sum(n))):
            raise Overflow(f"power sum of order {n} is not finite")


def _chunk_power_sums(series: np.ndarray, n_max: int, label: str) -> Tuple[float, ...]:
    sums = []
    power = np.array(series, dtype=float, copy=True)
    for n in range(1, n_max + 1):
        if not np.all(np.isfinite(power)):
            raise Overflow(f"{label} ** {n} overflows double precision")
        try:
            total = math.fsum(power)
        except OverflowError:
            raise Overflow(f"sum of {label} ** {n} overflows double precision")
        if not math.isfinite(total):
            raise Overflow(f"sum of {label} ** {n} overflows double precision")
        sums.append(total)
        if n < n_max:
            with np.errstate(over="ignore"):
                power = power * series
    return tuple(sums)


class PowerSumAccumulator:
    """Single-writer running power sums fed one chunk of trades at a time."""

    def __init__(self, n_max: int = DEFAULT_NMAX):
        self.n_max = check_nmax(n_max)
        self._sums = PowerSums.zero(self.n_max)

    def add_arrays(self, values: np.ndarray, volumes: np.ndarray) -> None:
        """
        Fold one chunk given as parallel value and volume arrays.

        Args:
            values: Trade values C(t_i)
            volumes: Trade volumes U(t_i)
        """
        values = np.asarray(values, dtype=float)
        volumes = np.asarray(volumes, dtype=float)
        if values.shape != volumes.shape or values.ndim != 1:
            raise DataError("values and volumes must be 1-d arrays of equal length")
        if values.size == 0:
            return
        value_sums = _chunk_power_sums(values, self.n_max, "value")
        volume_sums = _chunk_power_sums(volumes, self.n_max, "volume")
        zeros = (0.0,) * self.n_max
        chunk = PowerSums(self.n_max, int(values.size), value_sums, zeros, volume_sums, zeros)
        self._sums = merge(self._sums, chunk)

    def add_ticks(self, ticks: Union[WindowedTrades, Sequence[TradeTick]]) -> None:
        if isinstance(ticks, WindowedTrades):
            self.add_arrays(ticks.values(), ticks.volumes())
            return
        values = np.fromiter((t.value for t in ticks), dtype=float, count=len(ticks))
        volumes = np.fromiter((t.volume for t in ticks), dtype=float, count=len(ticks))
        self.add_arrays(values, volumes)

    def result(self) -> PowerSums:
        return self._sums


def accumulate(window: WindowedTrades, n_max: int = DEFAULT_NMAX) -> PowerSums:
    """
    Power sums of one window.

    Args:
        window: Trades of the window
        n_max: Highest power, 1..16

    Returns:
        PowerSums with C(n), U(n) for n = 1..n_max

    Raises:
        EmptyWindow: the window holds no trades
        Overflow: a power or partial sum is not finite
    """
    n_max = check_nmax(n_max)
    if window.count == 0:
        raise EmptyWindow()
    accumulator = PowerSumAccumulator(n_max)
    accumulator.add_ticks(window)
    return accumulator.result()


def accumulate_streaming(
    chunks: Iterable[Union[WindowedTrades, Sequence[TradeTick]]],
    n_max: int = DEFAULT_NMAX,
) -> PowerSums:
    """
    Power sums of a window delivered as consecutive chunks.

    Bitwise reproducible for a fixed chunking; different chunkings agree to
    within a few ulps of the total.
    """
    accumulator = PowerSumAccumulator(n_max)
    for chunk in chunks:
        accumulator.add_ticks(chunk)
    sums = accumulator.result()
    if sums.count == 0:
        raise EmptyWindow()
    return sums


def to_moments(sums: PowerSums) -> TradeMoments:
    """
    Trade value and volume moments C_m(n), U_m(n).

    Raises:
        EmptyWindow: sums were taken over no trades
    """
    if sums.count == 0:
        raise EmptyWindow()
    n = sums.count
    return TradeMoments(
        n_max=sums.n_max,
        count=n,
        value_moments=tuple(c / n for c in sums.value_sums),
        volume_moments=tuple(u / n for u in sums.volume_sums),
    )
