"""
Core value types: trades, averaging windows and the trades inside a window.

Timestamps are integer nanoseconds since the Unix epoch; window widths are
integer nanoseconds as well, so window membership is decided exactly.
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from src.errors import DataError, InconsistentValue, NonPositiveField

# Relative tolerance between a reported trade value and price * volume.
VALUE_TOLERANCE = 1e-6

_INT64_MIN = -(2 ** 63)
_INT64_MAX = 2 ** 63 - 1


class Alignment(str, Enum):
    """Where the window sits relative to its reference instant."""

    CENTERED = "centered"
    TRAILING = "trailing"


@dataclass(frozen=True)
class TradeTick:
    """One market trade: value = price * volume."""

    timestamp: int
    price: float
    volume: float
    value: float


def make_tick(
    timestamp: int,
    price: float,
    volume: float,
    value: Optional[float] = None,
) -> TradeTick:
    """
    Build a validated trade.

    Args:
        timestamp: Trade time in epoch nanoseconds
        price: Trade price, strictly positive
        volume: Traded volume, strictly positive
        value: Reported trade value; derived as price * volume when omitted

    Returns:
        An immutable TradeTick

    Raises:
        NonPositiveField: price or volume is not a positive finite number
        InconsistentValue: the supplied value disagrees with price * volume
    """
    if isinstance(timestamp, bool) or not isinstance(timestamp, (int, np.integer)):
        raise DataError(f"timestamp must be integer nanoseconds, got {timestamp!r}")
    timestamp = int(timestamp)
    if not _INT64_MIN <= timestamp <= _INT64_MAX:
        raise DataError(f"timestamp {timestamp} is not representable")

    price = float(price)
    volume = float(volume)
    if not (math.isfinite(price) and price > 0):
        raise NonPositiveField(f"price must be positive, got {price!r}")
    if not (math.isfinite(volume) and volume > 0):
        raise NonPositiveField(f"volume must be positive, got {volume!r}")

    expected = price * volume
    if not math.isfinite(expected):
        raise NonPositiveField(f"price * volume is not finite for price={price!r}, volume={volume!r}")
    if value is None:
        return TradeTick(timestamp, price, volume, expected)

    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise NonPositiveField(f"value must be positive, got {value!r}")
    if abs(value - expected) > VALUE_TOLERANCE * value:
        raise InconsistentValue(
            f"value {value!r} differs from price * volume = {expected!r} "
            f"beyond relative tolerance {VALUE_TOLERANCE}"
        )
    return TradeTick(timestamp, price, volume, value)


@dataclass(frozen=True)
class WindowSpec:
    """
    An averaging interval of width `width` around the instant `center`.

    Centered windows cover [center - width//2, center - width//2 + width);
    trailing windows cover [center - width, center).
    """

    center: int
    width: int
    alignment: Alignment = Alignment.CENTERED

    def __post_init__(self):
        if self.width <= 0:
            raise DataError(f"window width must be positive, got {self.width}")

    def bounds(self) -> Tuple[int, int]:
        """Half-open [lower, upper) interval in nanoseconds."""
        if self.alignment == Alignment.TRAILING:
            lower = self.center - self.width
        else:
            lower = self.center - self.width // 2
        return lower, lower + self.width

    def contains(self, timestamp: int) -> bool:
        lower, upper = self.bounds()
        return lower <= timestamp < upper


def window_of(lower: int, width: int, alignment: Alignment = Alignment.CENTERED) -> WindowSpec:
    """Window whose half-open interval starts exactly at `lower`."""
    alignment = Alignment(alignment)
    if alignment == Alignment.TRAILING:
        return WindowSpec(lower + width, width, alignment)
    return WindowSpec(lower + width // 2, width, alignment)


@dataclass(frozen=True)
class WindowedTrades:
    """The N trades of one window, in timestamp order (ties in input order)."""

    spec: WindowSpec
    ticks: Tuple[TradeTick, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "ticks", tuple(self.ticks))
        lower, upper = self.spec.bounds()
        previous = None
        for tick in self.ticks:
            if not lower <= tick.timestamp < upper:
                raise DataError(
                    f"tick at {tick.timestamp} lies outside window [{lower}, {upper})"
                )
            if previous is not None and tick.timestamp < previous:
                raise DataError("window ticks are not sorted by timestamp")
            previous = tick.timestamp

    @property
    def count(self) -> int:
        return len(self.ticks)

    def prices(self) -> np.ndarray:
        return np.fromiter((t.price for t in self.ticks), dtype=float, count=self.count)

    def volumes(self) -> np.ndarray:
        return np.fromiter((t.volume for t in self.ticks), dtype=float, count=self.count)

    def values(self) -> np.ndarray:
        return np.fromiter((t.value for t in self.ticks), dtype=float, count=self.count)


def select_window(ticks: Sequence[TradeTick], spec: WindowSpec) -> WindowedTrades:
    """Collect the ticks of `ticks` that fall inside `spec`, preserving order."""
    inside = sorted(
        (t for t in ticks if spec.contains(t.timestamp)),
        key=lambda t: t.timestamp,
    )
    return WindowedTrades(spec, tuple(inside))
