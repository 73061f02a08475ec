"""
Trade tape ingestion: parsing, validation and partitioning into windows.

Canonical schemas:
    CSV         header ts,price,volume[,value]; LF or CRLF line endings
    JSON lines  one object per line with keys ts, price, volume[, value]
"""
import csv
import io
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any, BinaryIO, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from src.errors import DataError, EmptyTape, OutOfOrderTimestamp, ParseError, TapeError
from src.trade_model import Alignment, TradeTick, WindowedTrades, WindowSpec, make_tick, window_of

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("ts", "price", "volume")
VALUE_COLUMN = "value"

# Guard against a tiny width over a long tape producing billions of windows.
MAX_WINDOWS = 10_000_000


class TapeKind(str, Enum):
    CSV = "csv"
    JSON_LINES = "json_lines"


class TimestampFormat(str, Enum):
    EPOCH_NANOS = "epoch_nanos"
    EPOCH_MILLIS = "epoch_millis"
    ISO8601 = "iso8601"


class TapeFormat(BaseModel):
    """How a tape is encoded. `has_value_column=None` detects the column."""

    model_config = ConfigDict(frozen=True)

    kind: TapeKind = TapeKind.CSV
    timestamp_format: TimestampFormat = TimestampFormat.EPOCH_NANOS
    has_value_column: Optional[bool] = None


@dataclass(frozen=True)
class TapeRecord:
    """A validated tick plus any optional columns found on its line."""

    line: int
    tick: TradeTick
    extras: Dict[str, Any] = field(default_factory=dict)


Source = Union[bytes, str, BinaryIO]


def _decode(source: Source) -> str:
    if isinstance(source, str):
        return source
    if not isinstance(source, (bytes, bytearray)):
        source = source.read()
    try:
        return bytes(source).decode("utf-8-sig")
    except UnicodeDecodeError as e:
        raise ParseError(f"tape is not valid UTF-8: {e}")


def parse_timestamp(raw: Any, timestamp_format: TimestampFormat) -> int:
    """
    Convert a raw timestamp field into epoch nanoseconds.

    Raises:
        ParseError: the field does not match the declared format
    """
    try:
        if timestamp_format == TimestampFormat.ISO8601:
            stamp = pd.Timestamp(str(raw).strip())
            if pd.isna(stamp):
                raise ValueError("not a time")
            if stamp.tzinfo is None:
                stamp = stamp.tz_localize("UTC")
            return int(stamp.value)

        if isinstance(raw, bool):
            raise ValueError("boolean timestamp")
        if isinstance(raw, int):
            amount = Decimal(raw)
        else:
            amount = Decimal(str(raw).strip())
        if not amount.is_finite():
            raise ValueError("non-finite timestamp")
        if timestamp_format == TimestampFormat.EPOCH_MILLIS:
            amount = amount * 1_000_000
        if amount != amount.to_integral_value():
            raise ValueError("timestamp is not a whole number of nanoseconds")
        return int(amount)
    except (ValueError, TypeError, InvalidOperation) as e:
        raise ParseError(f"bad timestamp {raw!r} for format {timestamp_format.value}: {e}")


def _parse_number(raw: Any, name: str) -> float:
    if isinstance(raw, bool):
        raise ParseError(f"bad {name} {raw!r}")
    try:
        return float(raw if isinstance(raw, (int, float)) else str(raw).strip())
    except (TypeError, ValueError):
        raise ParseError(f"bad {name} {raw!r}")


def _iter_csv_rows(text: str, allowed: Sequence[str]) -> Iterator[Tuple[int, Dict[str, str]]]:
    reader = csv.reader(io.StringIO(text, newline=""))
    header = None
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [cell.strip() for cell in row]
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            unknown = [c for c in header if c not in allowed]
            if missing:
                raise ParseError(f"header is missing columns: {', '.join(missing)}", line=reader.line_num)
            if unknown:
                raise ParseError(f"unknown columns: {', '.join(unknown)}", line=reader.line_num)
            if len(set(header)) != len(header):
                raise ParseError("duplicate columns in header", line=reader.line_num)
            yield reader.line_num, {"__header__": header}
            continue
        if len(row) != len(header):
            raise ParseError(
                f"expected {len(header)} fields, found {len(row)}", line=reader.line_num
            )
        yield reader.line_num, dict(zip(header, row))


def _iter_json_rows(text: str, allowed: Sequence[str]) -> Iterator[Tuple[int, Dict[str, Any]]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", line=number)
        if not isinstance(obj, dict):
            raise ParseError("each line must hold a JSON object", line=number)
        missing = [c for c in REQUIRED_COLUMNS if c not in obj]
        if missing:
            raise ParseError(f"missing keys: {', '.join(missing)}", line=number)
        unknown = [k for k in obj if k not in allowed]
        if unknown:
            raise ParseError(f"unknown keys: {', '.join(unknown)}", line=number)
        yield number, obj


def read_records(
    source: Source,
    fmt: TapeFormat,
    optional_columns: Sequence[str] = (),
) -> List[TapeRecord]:
    """
    Parse a tape into validated records, enforcing nondecreasing timestamps.

    Args:
        source: Tape bytes, text or a binary file object
        fmt: Declared encoding of the tape
        optional_columns: Extra columns allowed besides ts/price/volume/value;
            their raw values are returned in TapeRecord.extras

    Returns:
        Records in input order
    """
    text = _decode(source)
    allowed = list(REQUIRED_COLUMNS) + [VALUE_COLUMN] + list(optional_columns)

    if fmt.kind == TapeKind.CSV:
        rows = _iter_csv_rows(text, allowed)
    else:
        rows = _iter_json_rows(text, allowed)

    records: List[TapeRecord] = []
    previous_ts: Optional[int] = None
    for line, row in rows:
        if "__header__" in row:
            has_value = VALUE_COLUMN in row["__header__"]
            if fmt.has_value_column is True and not has_value:
                raise ParseError("value column declared but absent", line=line)
            if fmt.has_value_column is False and has_value:
                raise ParseError("value column present but declared absent", line=line)
            continue

        if fmt.kind == TapeKind.JSON_LINES:
            has_value = VALUE_COLUMN in row and row[VALUE_COLUMN] is not None
            if fmt.has_value_column is True and not has_value:
                raise ParseError("value key declared but absent", line=line)
            if fmt.has_value_column is False and VALUE_COLUMN in row:
                raise ParseError("value key present but declared absent", line=line)

        try:
            timestamp = parse_timestamp(row["ts"], fmt.timestamp_format)
            price = _parse_number(row["price"], "price")
            volume = _parse_number(row["volume"], "volume")
            raw_value = row.get(VALUE_COLUMN)
            value = None
            if raw_value is not None and str(raw_value).strip() != "":
                value = _parse_number(raw_value, "value")
            tick = make_tick(timestamp, price, volume, value)
        except TapeError as e:
            if e.line is not None:
                raise
            raise e.at_line(line) from None

        if previous_ts is not None and timestamp < previous_ts:
            raise OutOfOrderTimestamp(
                f"timestamp {timestamp} precedes previous timestamp {previous_ts}", line=line
            )
        previous_ts = timestamp
        extras = {k: row[k] for k in optional_columns if k in row}
        records.append(TapeRecord(line, tick, extras))

    logger.info("Parsed %d trades from %s tape", len(records), fmt.kind.value)
    return records


def parse_tape(source: Source, fmt: Optional[TapeFormat] = None) -> List[TradeTick]:
    """
    Parse a canonical trade tape.

    Args:
        source: Tape bytes, text or a binary file object
        fmt: Declared encoding (defaults to CSV with epoch-nanosecond timestamps)

    Returns:
        Ticks in nondecreasing timestamp order

    Raises:
        ParseError, OutOfOrderTimestamp, NonPositiveField, InconsistentValue,
        all carrying the offending line number
    """
    return [record.tick for record in read_records(source, fmt or TapeFormat())]


def _timestamps(ticks: Sequence[TradeTick]) -> np.ndarray:
    stamps = np.fromiter((t.timestamp for t in ticks), dtype=np.int64, count=len(ticks))
    if len(stamps) > 1 and np.any(np.diff(stamps) < 0):
        position = int(np.argmax(np.diff(stamps) < 0)) + 1
        raise OutOfOrderTimestamp(f"tick {position} precedes its predecessor")
    return stamps


def _slice(ticks: Sequence[TradeTick], stamps: np.ndarray, lower: int, upper: int) -> Tuple[TradeTick, ...]:
    start = int(np.searchsorted(stamps, lower, side="left"))
    stop = int(np.searchsorted(stamps, upper, side="left"))
    return tuple(ticks[start:stop])


def partition_windows(
    ticks: Sequence[TradeTick],
    width: int,
    alignment: Alignment = Alignment.CENTERED,
) -> List[WindowedTrades]:
    """
    Tile [first tick, last tick] with consecutive half-open windows.

    Every tick lands in exactly one window; windows without trades are kept
    with count 0.

    Args:
        ticks: Ticks sorted by timestamp
        width: Window width in nanoseconds
        alignment: Reference instant of each window (centered or trailing)

    Returns:
        Windows in time order
    """
    if not ticks:
        raise EmptyTape()
    if width <= 0:
        raise DataError(f"window width must be positive, got {width}")
    stamps = _timestamps(ticks)
    first, last = int(stamps[0]), int(stamps[-1])
    n_windows = (last - first) // width + 1
    if n_windows > MAX_WINDOWS:
        raise DataError(f"{n_windows} windows exceed the limit of {MAX_WINDOWS}; widen the window")

    windows = []
    for k in range(n_windows):
        spec = window_of(first + k * width, width, alignment)
        lower, upper = spec.bounds()
        windows.append(WindowedTrades(spec, _slice(ticks, stamps, lower, upper)))
    logger.info("Partitioned %d trades into %d windows of %d ns", len(ticks), len(windows), width)
    return windows


def sliding_windows(
    ticks: Sequence[TradeTick],
    width: int,
    step: int,
    alignment: Alignment = Alignment.CENTERED,
) -> List[WindowedTrades]:
    """
    Overlapping windows stepped along the tape.

    Centered windows are placed at t = first + k*step; trailing windows end at
    t = first + (k+1)*step, so the last trade is always covered when
    step <= width.
    """
    if not ticks:
        raise EmptyTape()
    if width <= 0 or step <= 0:
        raise DataError("window width and step must be positive")
    stamps = _timestamps(ticks)
    first, last = int(stamps[0]), int(stamps[-1])
    n_windows = (last - first) // step + 1
    if n_windows > MAX_WINDOWS:
        raise DataError(f"{n_windows} windows exceed the limit of {MAX_WINDOWS}; increase the step")

    alignment = Alignment(alignment)
    windows = []
    for k in range(n_windows):
        if alignment == Alignment.TRAILING:
            center = first + (k + 1) * step
        else:
            center = first + k * step
        spec = WindowSpec(center, width, alignment)
        lower, upper = spec.bounds()
        windows.append(WindowedTrades(spec, _slice(ticks, stamps, lower, upper)))
    return windows


def _format_timestamp(timestamp: int, timestamp_format: TimestampFormat) -> str:
    if timestamp_format == TimestampFormat.ISO8601:
        return pd.Timestamp(timestamp, unit="ns", tz="UTC").isoformat()
    if timestamp_format == TimestampFormat.EPOCH_MILLIS:
        return format(Decimal(timestamp) / Decimal(1_000_000), "f")
    return str(timestamp)


def write_tape(ticks: Sequence[TradeTick], fmt: Optional[TapeFormat] = None) -> bytes:
    """
    Serialize ticks in the canonical format, always including the value column.

    Floats use their shortest round-trip repr, lines end with LF, so equal
    tapes serialize to identical bytes.
    """
    fmt = fmt or TapeFormat()
    lines = []
    if fmt.kind == TapeKind.CSV:
        lines.append("ts,price,volume,value")
        for t in ticks:
            ts = _format_timestamp(t.timestamp, fmt.timestamp_format)
            lines.append(f"{ts},{t.price!r},{t.volume!r},{t.value!r}")
    else:
        for t in ticks:
            ts: Any = t.timestamp
            if fmt.timestamp_format != TimestampFormat.EPOCH_NANOS:
                ts = _format_timestamp(t.timestamp, fmt.timestamp_format)
            lines.append(json.dumps({"ts": ts, "price": t.price, "volume": t.volume, "value": t.value}))
    return ("\n".join(lines) + "\n").encode("utf-8")
