"""
Command-line batch runs: moments, density, compare, simulate, aggregate.

Reports go to stdout (or --out), logs and errors to stderr. Exit codes are
0 on success, 1 for usage and data errors, 2 for numerical failures.
"""
import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence

from src.aggregation import AgentTape, Weight, aggregate_macro, parse_agent_tapes, weighted_expectation
from src.char_fn import density, fit_charfn, make_grid
from src.config import Command, OutputFormat, RunConfig, configure_logging, get_settings
from src.errors import EmptyTape, EmptyWindowAll, TapeError
from src.ingest import TapeKind, TimestampFormat, parse_tape, partition_windows, sliding_windows
from src.power_sums import accumulate, to_moments
from src.price_moments import (
    frequency_price_stats,
    moment_gap,
    power_correlations,
    price_moments_from_trades,
    price_volume_correlation,
)
from src.synthetic import generate, load_spec, metadata, oracle_price_moments, write_tape_with_metadata
from src.trade_model import Alignment, TradeTick, WindowedTrades, window_of
from src.utils import format_csv, format_output, read_source, save_output

logger = logging.getLogger(__name__)

MOMENT_FIELDS = (
    "C", "U", "p", "mean", "variance", "raw_variance", "variance_clamped",
    "consistent", "skewness", "excess_kurtosis", "frequency_mean",
)
COMPARE_FIELDS = (
    "frequency_mean", "vwap", "gap", "relative_gap", "gap_se", "price_volume_corr", "power_corr",
)


def _window_header(index: int, window: WindowedTrades) -> Dict[str, Any]:
    lower, upper = window.spec.bounds()
    return {"window": index, "lower_ns": lower, "upper_ns": upper, "n": window.count}


class TapeAnalyzer:
    """
    Runs one subcommand from a validated RunConfig.

    Each run_* method returns a report: the config echo plus one record per
    window, in window order.
    """

    def __init__(self, config: RunConfig):
        self.config = config

    def run(self) -> Dict[str, Any]:
        handlers: Dict[Command, Callable[[], Dict[str, Any]]] = {
            Command.MOMENTS: self.run_moments,
            Command.DENSITY: self.run_density,
            Command.COMPARE: self.run_compare,
            Command.SIMULATE: self.run_simulate,
            Command.AGGREGATE: self.run_aggregate,
        }
        return handlers[self.config.command]()

    def _load_ticks(self) -> List[TradeTick]:
        ticks = parse_tape(read_source(self.config.input), self.config.tape)
        if not ticks:
            raise EmptyTape()
        return ticks

    def _whole_tape(self, ticks: Sequence[TradeTick]) -> WindowedTrades:
        first, last = ticks[0].timestamp, ticks[-1].timestamp
        spec = window_of(first, last - first + 1, self.config.align)
        return WindowedTrades(spec, tuple(ticks))

    def _windows(self, ticks: Sequence[TradeTick]) -> List[WindowedTrades]:
        """
        One window over the whole tape, consecutive windows of --window
        seconds, or overlapping ones stepped by --step seconds.
        """
        width = self.config.window_ns
        if width is None:
            return [self._whole_tape(ticks)]
        if self.config.step_ns is not None:
            return sliding_windows(ticks, width, self.config.step_ns, self.config.align)
        return partition_windows(ticks, width, self.config.align)

    def _map(self, func: Callable[[int, WindowedTrades], Dict[str, Any]], windows: Sequence[WindowedTrades]):
        # map() yields in submission order whatever the completion order.
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            return list(pool.map(func, range(len(windows)), windows))

    def _report(self, records: List[Dict[str, Any]], **extra: Any) -> Dict[str, Any]:
        report = {"config": self.config.echo()}
        report.update(extra)
        report["records"] = records
        return report

    def moment_record(self, index: int, window: WindowedTrades) -> Dict[str, Any]:
        record = _window_header(index, window)
        if window.count == 0:
            record.update({name: None for name in MOMENT_FIELDS})
            return record
        sums = accumulate(window, self.config.nmax)
        stats = price_moments_from_trades(to_moments(sums))
        record.update({
            "C": sums.value_sums,
            "U": sums.volume_sums,
            "p": stats.p,
            "mean": stats.mean,
            "variance": stats.variance,
            "raw_variance": stats.raw_variance,
            "variance_clamped": stats.variance_clamped,
            "consistent": stats.consistent,
            "skewness": stats.skewness,
            "excess_kurtosis": stats.excess_kurtosis,
            "frequency_mean": frequency_price_stats(window).mean,
        })
        return record

    def run_moments(self) -> Dict[str, Any]:
        ticks = self._load_ticks()
        windows = self._windows(ticks)
        records = self._map(self.moment_record, windows)
        logger.info("Computed moments for %d windows", len(records))
        return self._report(records)

    def density_record(self, index: int, window: WindowedTrades) -> Dict[str, Any]:
        record = _window_header(index, window)
        record["k"] = self.config.k
        if window.count == 0:
            record.update({"coefficients": None, "clipped_mass": None, "mass": None, "price": [], "density": []})
            return record
        stats = price_moments_from_trades(to_moments(accumulate(window, self.config.nmax)))
        approx = fit_charfn(stats, self.config.k)
        grid = make_grid(approx, self.config.grid_points, self.config.grid_sigmas)
        result = density(approx, grid)
        record.update({
            "coefficients": approx.coefficients,
            "clipped_mass": result.clipped_mass,
            "mass": result.mass,
            "price": result.grid,
            "density": result.density,
        })
        return record

    def run_density(self) -> Dict[str, Any]:
        ticks = self._load_ticks()
        records = self._map(self.density_record, self._windows(ticks))
        return self._report(records)

    def compare_record(self, index: int, window: WindowedTrades) -> Dict[str, Any]:
        record = _window_header(index, window)
        if window.count == 0:
            record.update({name: None for name in COMPARE_FIELDS})
            return record
        stats = price_moments_from_trades(to_moments(accumulate(window, 1)))
        frequency = frequency_price_stats(window).mean
        _, se = moment_gap(window, 1)
        gap = stats.mean - frequency
        record.update({
            "frequency_mean": frequency,
            "vwap": stats.mean,
            "gap": gap,
            "relative_gap": gap / frequency,
            "gap_se": se,
            "price_volume_corr": price_volume_correlation(window),
            # corr(p**n, U**n), n = 1..nmax
            "power_corr": [row[n] for n, row in enumerate(power_correlations(window, self.config.nmax))],
        })
        return record

    def run_compare(self) -> Dict[str, Any]:
        ticks = self._load_ticks()
        records = self._map(self.compare_record, self._windows(ticks))
        summary: Dict[str, Any] = {"max_abs_gap": None, "max_gap_window": None}
        gaps = [(abs(r["gap"]), r["window"]) for r in records if r["gap"] is not None]
        if gaps:
            # Earliest window wins ties.
            best = max(gaps, key=lambda item: (item[0], -item[1]))
            summary = {"max_abs_gap": best[0], "max_gap_window": best[1]}
        return self._report(records, summary=summary)

    def run_simulate(self) -> Dict[str, Any]:
        spec = load_spec(read_source(self.config.spec), seed=self.config.seed)
        ticks = generate(spec)
        write_tape_with_metadata(ticks, spec, self.config.out, self.config.tape)
        record = self.moment_record(0, self._whole_tape(ticks))
        record["oracle_p"] = oracle_price_moments(spec, ticks, self.config.nmax)
        return self._report([record], metadata=metadata(spec, self.config.tape))

    def aggregate_record(self, index: int, window: WindowedTrades, tapes: Sequence[AgentTape]) -> Dict[str, Any]:
        lower, upper = window.spec.bounds()
        record: Dict[str, Any] = {"window": index, "lower_ns": lower, "upper_ns": upper}
        try:
            macro = aggregate_macro(tapes, window.spec, self.config.nmax)
        except EmptyWindowAll:
            record.update({"n": 0, "C": None, "U": None, "agents": None,
                           "weighted_expectation": None, "count_expectation": None})
            return record
        record.update({
            "n": macro.totals.count,
            "C": macro.totals.value_sums,
            "U": macro.totals.volume_sums,
            "agents": {agent: sums.count for agent, sums in macro.per_agent.items()},
        })
        if any(tape.expectations is not None for tape in tapes):
            record["weighted_expectation"] = weighted_expectation(
                tapes, window.spec, self.config.weight, self.config.power
            )
            record["count_expectation"] = weighted_expectation(tapes, window.spec, Weight.COUNT, 1)
        else:
            record["weighted_expectation"] = None
            record["count_expectation"] = None
        return record

    def run_aggregate(self) -> Dict[str, Any]:
        tapes = parse_agent_tapes(read_source(self.config.input), self.config.tape)
        # Agent tapes interleave in time; windows are laid over their union.
        ticks = sorted((t for tape in tapes for t in tape.ticks), key=lambda t: t.timestamp)
        if not ticks:
            raise EmptyTape()
        windows = self._windows(ticks)
        records = self._map(lambda i, w: self.aggregate_record(i, w, tapes), windows)
        return self._report(records)

    def _csv_header(self, report: Dict[str, Any]) -> str:
        """Everything but the records, as one JSON comment line."""
        header = {key: value for key, value in report.items() if key != "records"}
        if self.config.command == Command.DENSITY:
            header["windows"] = [
                {key: r[key] for key in ("window", "k", "coefficients", "clipped_mass", "mass")}
                for r in report["records"]
            ]
        return "# " + format_output(header, pretty=False)

    def render(self, report: Dict[str, Any]) -> str:
        if self.config.output == OutputFormat.JSON:
            return format_output(report)
        return self._csv_header(report) + self._csv_body(report)

    def _csv_body(self, report: Dict[str, Any]) -> str:
        records = report["records"]
        if self.config.command == Command.DENSITY:
            rows = [
                {"window": r["window"], "price": price, "density": value}
                for r in records
                for price, value in zip(r["price"], r["density"])
            ]
            return format_csv(rows, columns=["window", "price", "density"])
        if self.config.command == Command.AGGREGATE:
            records = [{k: v for k, v in r.items() if k != "agents"} for r in records]
        return format_csv(records)

    def emit(self, report: Dict[str, Any]) -> None:
        content = self.render(report)
        # simulate uses --out for the tape itself.
        if self.config.out and self.config.command != Command.SIMULATE:
            save_output(content, self.config.out)
            logger.info("Saved report to %s", self.config.out)
        else:
            sys.stdout.write(content)


class TapeArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--input", help="Path to the trade tape")
    shared.add_argument(
        "--format",
        choices=["csv", "json-lines"],
        default="csv",
        help="Tape encoding (default: csv)",
    )
    shared.add_argument(
        "--timestamps",
        choices=[f.value for f in TimestampFormat],
        default=TimestampFormat.EPOCH_NANOS.value,
        help="Timestamp encoding (default: epoch_nanos)",
    )
    shared.add_argument("--window", type=float, help="Window width in seconds (default: whole tape)")
    shared.add_argument("--step", type=float, help="Slide windows by this many seconds (default: no overlap)")
    shared.add_argument("--align", choices=[a.value for a in Alignment], default=Alignment.CENTERED.value)
    shared.add_argument("--nmax", type=int, help="Highest moment order")
    shared.add_argument("--out", help="Output file path")
    shared.add_argument("--output", choices=[f.value for f in OutputFormat], default=OutputFormat.JSON.value)

    parser = TapeArgumentParser(
        description="Volume weighted price moments and densities from trade tapes"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("moments", parents=[shared], help="Per-window power sums and price moments")

    density_parser = commands.add_parser("density", parents=[shared], help="Price density from F_2 or F_3")
    density_parser.add_argument("--k", type=int, choices=[2, 3], default=2)
    density_parser.add_argument("--grid-points", type=int, help="Grid size (default 4097)")
    density_parser.add_argument("--grid-sigmas", type=float, help="Grid half-width in sigmas (default 6)")

    commands.add_parser("compare", parents=[shared], help="Frequency mean against VWAP per window")

    simulate_parser = commands.add_parser("simulate", parents=[shared], help="Generate a synthetic tape")
    simulate_parser.add_argument("--spec", required=True, help="JSON tape spec")
    simulate_parser.add_argument("--seed", type=int, help="Override the spec's seed")

    aggregate_parser = commands.add_parser("aggregate", parents=[shared], help="Macro variables from agent tapes")
    aggregate_parser.add_argument("--weight", choices=[w.value for w in Weight], default=Weight.VALUE.value)
    aggregate_parser.add_argument("--power", type=int, default=1)
    return parser


def resolve_config(args: argparse.Namespace, settings=None) -> RunConfig:
    settings = settings or get_settings()
    grid_points = getattr(args, "grid_points", None)
    grid_sigmas = getattr(args, "grid_sigmas", None)
    return RunConfig.build(
        command=args.command,
        input=args.input,
        tape_format=TapeKind.JSON_LINES if args.format == "json-lines" else TapeKind.CSV,
        timestamps=args.timestamps,
        window_seconds=args.window,
        step_seconds=args.step,
        align=args.align,
        nmax=args.nmax if args.nmax is not None else settings.nmax,
        k=getattr(args, "k", None),
        grid_points=grid_points if grid_points is not None else settings.grid_points,
        grid_sigmas=grid_sigmas if grid_sigmas is not None else settings.grid_sigmas,
        output=args.output,
        out=args.out,
        spec=getattr(args, "spec", None),
        seed=getattr(args, "seed", None),
        weight=getattr(args, "weight", None),
        power=getattr(args, "power", None),
        workers=settings.workers,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for CLI usage."""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
        configure_logging(settings.log_level)
        config = resolve_config(args, settings)
        analyzer = TapeAnalyzer(config)
        analyzer.emit(analyzer.run())
    except TapeError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
