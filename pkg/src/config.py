"""
Environment settings and the validated configuration of one run.
"""
import logging
import os
import sys
from enum import Enum
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.aggregation import Weight
from src.errors import UsageError
from src.ingest import TapeFormat, TapeKind, TimestampFormat
from src.power_sums import DEFAULT_NMAX, MAX_NMAX
from src.trade_model import Alignment

load_dotenv()

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
NANOS_PER_SECOND = 1_000_000_000


class Settings(BaseModel):
    """Defaults taken from the environment (or a .env file)."""

    nmax: int = Field(default=DEFAULT_NMAX, ge=1, le=MAX_NMAX)
    workers: int = Field(default=4, ge=1)
    log_level: str = "WARNING"
    api_host: str = "0.0.0.0"
    api_port: int = 8000
    grid_points: int = Field(default=4097, ge=2)
    grid_sigmas: float = Field(default=6.0, gt=0)

    @classmethod
    def from_env(cls) -> "Settings":
        env = {
            "nmax": os.getenv("TAPE_NMAX"),
            "workers": os.getenv("TAPE_WORKERS"),
            "log_level": os.getenv("TAPE_LOG_LEVEL"),
            "api_host": os.getenv("API_HOST"),
            "api_port": os.getenv("API_PORT"),
            "grid_points": os.getenv("TAPE_GRID_POINTS"),
            "grid_sigmas": os.getenv("TAPE_GRID_SIGMAS"),
        }
        try:
            return cls(**{k: v for k, v in env.items() if v not in (None, "")})
        except ValidationError as e:
            raise UsageError(f"invalid environment settings: {e.errors()[0]['loc'][0]}: {e.errors()[0]['msg']}")


def get_settings() -> Settings:
    return Settings.from_env()


def configure_logging(level: str = "WARNING") -> None:
    """Send log records to stderr; stdout is reserved for data."""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )


class Command(str, Enum):
    MOMENTS = "moments"
    DENSITY = "density"
    COMPARE = "compare"
    SIMULATE = "simulate"
    AGGREGATE = "aggregate"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class RunConfig(BaseModel):
    """
    Fully resolved flags of one run.

    Validated before any file is read; echoed into every JSON report.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    command: Command
    input: Optional[str] = None
    tape_format: TapeKind = TapeKind.CSV
    timestamps: TimestampFormat = TimestampFormat.EPOCH_NANOS
    window_seconds: Optional[float] = Field(default=None, gt=0)
    step_seconds: Optional[float] = Field(default=None, gt=0)
    align: Alignment = Alignment.CENTERED
    nmax: int = Field(default=DEFAULT_NMAX, ge=1, le=MAX_NMAX)
    k: int = 2
    grid_points: int = Field(default=4097, ge=2)
    grid_sigmas: float = Field(default=6.0, gt=0)
    output: OutputFormat = OutputFormat.JSON
    out: Optional[str] = None
    spec: Optional[str] = None
    seed: Optional[int] = Field(default=None, ge=0)
    weight: Weight = Weight.VALUE
    power: int = Field(default=1, ge=1)
    workers: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _check_command(self):
        if self.command == Command.SIMULATE:
            if not self.spec:
                raise ValueError("simulate needs --spec")
            if not self.out:
                raise ValueError("simulate needs --out for the generated tape")
            if self.window_seconds is not None or self.step_seconds is not None:
                raise ValueError("simulate reports the whole generated tape; --window and --step do not apply")
        elif not self.input:
            raise ValueError(f"{self.command.value} needs --input")
        if self.command == Command.DENSITY and self.k not in (2, 3):
            raise ValueError(f"--k must be 2 or 3, got {self.k}")
        if self.command == Command.DENSITY and self.nmax < self.k:
            raise ValueError(f"--nmax {self.nmax} is below --k {self.k}")
        if self.window_seconds is not None and self.window_ns < 1:
            raise ValueError("--window is shorter than one nanosecond")
        if self.step_seconds is not None:
            if self.window_seconds is None:
                raise ValueError("--step needs --window")
            if self.step_ns < 1:
                raise ValueError("--step is shorter than one nanosecond")
        return self

    @classmethod
    def build(cls, **values: Any) -> "RunConfig":
        """Validate flags, turning validation failures into UsageError."""
        try:
            return cls(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(part) for part in first["loc"])
            raise UsageError(f"{where}: {first['msg']}" if where else first["msg"]) from None

    @property
    def window_ns(self) -> Optional[int]:
        if self.window_seconds is None:
            return None
        return int(round(self.window_seconds * NANOS_PER_SECOND))

    @property
    def step_ns(self) -> Optional[int]:
        if self.step_seconds is None:
            return None
        return int(round(self.step_seconds * NANOS_PER_SECOND))

    @property
    def tape(self) -> TapeFormat:
        return TapeFormat(kind=self.tape_format, timestamp_format=self.timestamps)

    def echo(self) -> Dict[str, Any]:
        """Config header embedded in reports; worker count does not affect results."""
        return self.model_dump(mode="json", exclude={"workers"})
