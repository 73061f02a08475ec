"""
Macro variables composed from per-agent trade tapes, and trade-weighted
averages of the expectations agents attached to their trades.
"""
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DataError, EmptyWindowAll, MissingExpectations, ParseError
from src.ingest import Source, TapeFormat, read_records
from src.power_sums import DEFAULT_NMAX, PowerSumAccumulator, PowerSums, check_nmax, merge
from src.trade_model import TradeTick, WindowSpec

logger = logging.getLogger(__name__)

AGENT_COLUMNS = ("agent_id", "expectation", "trade_id")
DEFAULT_AGENT = "default"


class Weight(str, Enum):
    VALUE = "value"
    VOLUME = "volume"
    COUNT = "count"


@dataclass(frozen=True)
class AgentTape:
    """
    Trades of one agent, with an optional expectation label and trade id per
    trade. Trades sharing a trade id across tapes are the same trade.
    """

    agent_id: str
    ticks: Tuple[TradeTick, ...]
    expectations: Optional[Tuple[Optional[float], ...]] = None
    trade_ids: Optional[Tuple[Optional[str], ...]] = None
    # Tick positions in timestamp order (ties in input order) and their stamps.
    _order: np.ndarray = field(init=False, repr=False, compare=False)
    _stamps: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "ticks", tuple(self.ticks))
        stamps = np.fromiter((t.timestamp for t in self.ticks), dtype=np.int64, count=len(self.ticks))
        order = np.argsort(stamps, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_stamps", stamps[order])
        for name in ("expectations", "trade_ids"):
            column = getattr(self, name)
            if column is None:
                continue
            column = tuple(column)
            if len(column) != len(self.ticks):
                raise DataError(f"agent {self.agent_id}: {len(column)} {name} for {len(self.ticks)} trades")
            object.__setattr__(self, name, column)
        if self.expectations is not None:
            for e in self.expectations:
                if e is not None and not math.isfinite(e):
                    raise DataError(f"agent {self.agent_id}: expectation {e!r} is not finite")

    def indices_in(self, window: WindowSpec) -> np.ndarray:
        """Positions of the ticks inside `window`, in timestamp order."""
        lower, upper = window.bounds()
        start = int(np.searchsorted(self._stamps, lower, side="left"))
        stop = int(np.searchsorted(self._stamps, upper, side="left"))
        return self._order[start:stop]


@dataclass(frozen=True)
class MacroVariables:
    """Power sums per agent over one window and their economy-wide total."""

    n_max: int
    per_agent: Dict[str, PowerSums]
    totals: PowerSums


def _parse_expectation(raw, line: int) -> Optional[float]:
    if raw is None or str(raw).strip() == "":
        return None
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ParseError(f"bad expectation {raw!r}", line=line)


def parse_agent_tapes(source: Source, fmt: Optional[TapeFormat] = None) -> List[AgentTape]:
    """
    Split one canonical tape into agent tapes.

    Optional columns agent_id, expectation and trade_id are honoured; rows
    without an agent id belong to the agent "default". Agents are returned in
    order of first appearance.
    """
    records = read_records(source, fmt or TapeFormat(), optional_columns=AGENT_COLUMNS)
    grouped: "OrderedDict[str, dict]" = OrderedDict()
    for record in records:
        raw_agent = record.extras.get("agent_id")
        agent = str(raw_agent).strip() if raw_agent not in (None, "") else DEFAULT_AGENT
        raw_id = record.extras.get("trade_id")
        trade_id = str(raw_id).strip() if raw_id not in (None, "") else None
        entry = grouped.setdefault(agent, {"ticks": [], "expectations": [], "trade_ids": []})
        entry["ticks"].append(record.tick)
        entry["expectations"].append(_parse_expectation(record.extras.get("expectation"), record.line))
        entry["trade_ids"].append(trade_id)

    tapes = []
    for agent, entry in grouped.items():
        expectations = entry["expectations"]
        trade_ids = entry["trade_ids"]
        tapes.append(AgentTape(
            agent_id=agent,
            ticks=tuple(entry["ticks"]),
            expectations=None if all(e is None for e in expectations) else tuple(expectations),
            trade_ids=None if all(t is None for t in trade_ids) else tuple(trade_ids),
        ))
    logger.info("Parsed %d trades for %d agents", len(records), len(tapes))
    return tapes


def _window_trades(
    tapes: Sequence[AgentTape],
    window: WindowSpec,
) -> Iterator[Tuple[str, TradeTick, Optional[float]]]:
    """In-window trades of every tape, each trade id counted once (first occurrence)."""
    seen: Dict[str, TradeTick] = {}
    for tape in tapes:
        for i in tape.indices_in(window).tolist():
            tick = tape.ticks[i]
            trade_id = tape.trade_ids[i] if tape.trade_ids is not None else None
            if trade_id is not None:
                if trade_id in seen:
                    if seen[trade_id] != tick:
                        logger.warning(
                            "Trade id %s appears with different contents; keeping the first occurrence",
                            trade_id,
                        )
                    continue
                seen[trade_id] = tick
            expectation = tape.expectations[i] if tape.expectations is not None else None
            yield tape.agent_id, tick, expectation


def aggregate_macro(
    tapes: Sequence[AgentTape],
    window: WindowSpec,
    n_max: int = DEFAULT_NMAX,
) -> MacroVariables:
    """
    Per-agent and total power sums C(n), U(n) over a window.

    Args:
        tapes: Agent tapes; trades sharing a trade id are counted once
        window: Averaging window
        n_max: Highest power

    Returns:
        MacroVariables; agents without trades in the window carry zero sums

    Raises:
        EmptyWindowAll: no agent traded inside the window
    """
    n_max = check_nmax(n_max)
    if not tapes:
        raise DataError("at least one agent tape is required")

    trades: "OrderedDict[str, List[TradeTick]]" = OrderedDict((tape.agent_id, []) for tape in tapes)
    for agent, tick, _ in _window_trades(tapes, window):
        trades[agent].append(tick)

    per_agent: Dict[str, PowerSums] = {}
    totals = PowerSums.zero(n_max)
    for agent, ticks in trades.items():
        accumulator = PowerSumAccumulator(n_max)
        accumulator.add_ticks(ticks)
        per_agent[agent] = accumulator.result()
        totals = merge(totals, per_agent[agent])

    if totals.count == 0:
        raise EmptyWindowAll()
    logger.debug("Aggregated %d trades from %d agents", totals.count, len(per_agent))
    return MacroVariables(n_max, per_agent, totals)


def weighted_expectation(
    tapes: Sequence[AgentTape],
    window: WindowSpec,
    weight: Weight = Weight.VALUE,
    n: int = 1,
) -> float:
    """
    Average expectation sum(e_i * w_i**n) / sum(w_i**n) over in-window trades.

    w_i is the trade value or volume, or 1 for count weighting.

    Raises:
        MissingExpectations: an in-window trade has no expectation label
        EmptyWindowAll: no agent traded inside the window
    """
    weight = Weight(weight)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise DataError(f"power must be a positive integer, got {n!r}")

    expectations = []
    weights = []
    for agent, tick, expectation in _window_trades(tapes, window):
        if expectation is None:
            raise MissingExpectations(f"agent {agent}: trade at {tick.timestamp} has no expectation")
        expectations.append(expectation)
        if weight == Weight.VALUE:
            weights.append(tick.value)
        elif weight == Weight.VOLUME:
            weights.append(tick.volume)
        else:
            weights.append(1.0)
    if not expectations:
        raise EmptyWindowAll()

    e = np.asarray(expectations, dtype=float)
    w = np.asarray(weights, dtype=float) ** n
    total = math.fsum(w)
    if not (math.isfinite(total) and total > 0):
        raise DataError(f"weights to the power {n} do not sum to a positive finite number")
    average = math.fsum(e * w) / total
    # Rounding may step just outside the label range.
    return min(max(average, float(e.min())), float(e.max()))
