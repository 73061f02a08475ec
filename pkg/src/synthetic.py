"""
Synthetic trade tapes with controlled price and volume laws.

Every law is driven by a standard normal shock: lognormal laws use it
directly, uniform and two-point laws through the normal CDF. Volume
dependence on price is then a matter of which shock feeds the volume law.

Randomness comes from numpy's PCG64. SeedSequence(seed).spawn(2) yields the
price stream and the volume stream, in that order.
"""
import json
import logging
import math
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.special import ndtr

from src.errors import BadSpec, DataError
from src.ingest import TapeFormat, write_tape
from src.power_sums import check_nmax
from src.trade_model import TradeTick, make_tick

logger = logging.getLogger(__name__)

GENERATOR_NAME = "numpy.PCG64"
STREAM_RULE = "SeedSequence(seed).spawn(2) -> [price, volume]"
NANOS_PER_SECOND = 1_000_000_000


class _Law(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class LognormalLaw(_Law):
    kind: Literal["lognormal"] = "lognormal"
    mu: float = 0.0
    s: float = Field(gt=0)

    def sample(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.mu + self.s * z)

    def raw_moment(self, n: int) -> float:
        return math.exp(n * self.mu + 0.5 * (n * self.s) ** 2)


class UniformLaw(_Law):
    kind: Literal["uniform"] = "uniform"
    a: float = Field(gt=0)
    b: float

    @model_validator(mode="after")
    def _ordered(self):
        if not self.a < self.b:
            raise ValueError("uniform law needs a < b")
        return self

    def sample(self, z: np.ndarray) -> np.ndarray:
        return self.a + (self.b - self.a) * ndtr(z)

    def raw_moment(self, n: int) -> float:
        return (self.b ** (n + 1) - self.a ** (n + 1)) / ((n + 1) * (self.b - self.a))


class TwoPointLaw(_Law):
    """p_a with probability w, otherwise p_b."""

    kind: Literal["two_point"] = "two_point"
    p_a: float = Field(gt=0)
    p_b: float = Field(gt=0)
    w: float = Field(gt=0, lt=1)

    def sample(self, z: np.ndarray) -> np.ndarray:
        return np.where(ndtr(z) < self.w, self.p_a, self.p_b)

    def raw_moment(self, n: int) -> float:
        return self.w * self.p_a ** n + (1.0 - self.w) * self.p_b ** n


class ConstantLaw(_Law):
    kind: Literal["constant"] = "constant"
    c: float = Field(gt=0)

    def sample(self, z: np.ndarray) -> np.ndarray:
        return np.full(z.shape, self.c, dtype=float)

    def raw_moment(self, n: int) -> float:
        return self.c ** n


PriceLaw = Annotated[Union[LognormalLaw, UniformLaw, TwoPointLaw], Field(discriminator="kind")]
VolumeLaw = Annotated[Union[ConstantLaw, LognormalLaw, UniformLaw], Field(discriminator="kind")]


class Independent(_Law):
    kind: Literal["independent"] = "independent"


class Comonotone(_Law):
    """Volume is driven by the price shock itself."""

    kind: Literal["comonotone"] = "comonotone"


class VolumeFollowsPrice(_Law):
    """U = V * exp(beta * z_p), V an independent draw from the volume law."""

    kind: Literal["volume_follows_price"] = "volume_follows_price"
    beta: float


Dependence = Annotated[Union[Independent, Comonotone, VolumeFollowsPrice], Field(discriminator="kind")]


class TapeSpec(BaseModel):
    """Recipe for one synthetic tape."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_trades: int = Field(ge=1)
    price_law: PriceLaw
    volume_law: VolumeLaw = ConstantLaw(c=1.0)
    dependence: Dependence = Independent()
    seed: int = Field(default=0, ge=0)
    start_ns: int = 0
    spacing_ns: int = Field(default=NANOS_PER_SECOND, gt=0)


def load_spec(source: Union[str, bytes, dict], seed: Optional[int] = None) -> TapeSpec:
    """
    Validate a TapeSpec from JSON text or a mapping.

    Args:
        source: JSON document or already-decoded mapping
        seed: Overrides the spec's seed when given

    Raises:
        BadSpec: the document is not valid JSON or fails validation
    """
    try:
        if isinstance(source, dict):
            spec = TapeSpec.model_validate(source)
        else:
            spec = TapeSpec.model_validate_json(source)
    except ValidationError as e:
        raise BadSpec(f"invalid tape spec: {e.error_count()} error(s): {e.errors()[0]['msg']}") from None
    if seed is not None:
        if seed < 0:
            raise BadSpec(f"seed must be non-negative, got {seed}")
        spec = spec.model_copy(update={"seed": int(seed)})
    return spec


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    price_seq, volume_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(price_seq)), np.random.Generator(np.random.PCG64(volume_seq))


def draw(spec: TapeSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Price and volume arrays of `spec`, before they become ticks."""
    price_rng, volume_rng = _streams(spec.seed)
    n = spec.n_trades
    z_price = price_rng.standard_normal(n)
    prices = spec.price_law.sample(z_price)

    dependence = spec.dependence
    if isinstance(dependence, Comonotone):
        volumes = spec.volume_law.sample(z_price)
    else:
        volumes = spec.volume_law.sample(volume_rng.standard_normal(n))
        if isinstance(dependence, VolumeFollowsPrice):
            volumes = volumes * np.exp(dependence.beta * z_price)
    return prices, volumes


def generate(spec: TapeSpec) -> List[TradeTick]:
    """
    Draw the tape described by `spec`.

    Deterministic for a fixed seed; timestamps start at spec.start_ns and are
    spec.spacing_ns apart.

    Raises:
        BadSpec: a drawn price or volume is not a positive finite number
    """
    prices, volumes = draw(spec)
    ticks = []
    try:
        for i, (price, volume) in enumerate(zip(prices.tolist(), volumes.tolist())):
            ticks.append(make_tick(spec.start_ns + i * spec.spacing_ns, price, volume))
    except DataError as e:
        raise BadSpec(f"spec produced an invalid trade: {e}") from None
    logger.info("Generated %d synthetic trades (seed %d, %s)", len(ticks), spec.seed, spec.dependence.kind)
    return ticks


def oracle_price_moments(spec: TapeSpec, tape: Sequence[TradeTick], n_max: int) -> Tuple[float, ...]:
    """
    Equal-weight sample moments (1/N) sum p_i**n of the realised prices.

    Under independent dependence these are what the moment-based p(n)
    estimates.
    """
    n_max = check_nmax(n_max)
    if len(tape) != spec.n_trades:
        raise DataError(f"tape has {len(tape)} trades, spec says {spec.n_trades}")
    prices = np.fromiter((t.price for t in tape), dtype=float, count=len(tape))
    moments = []
    power = prices.copy()
    for _ in range(n_max):
        moments.append(math.fsum(power) / len(tape))
        power = power * prices
    return tuple(moments)


def population_price_moments(spec: TapeSpec, n_max: int) -> Tuple[float, ...]:
    """Raw moments E[p**n] of the price law itself, n = 1..n_max."""
    n_max = check_nmax(n_max)
    return tuple(spec.price_law.raw_moment(n) for n in range(1, n_max + 1))


def metadata(spec: TapeSpec, fmt: TapeFormat) -> dict:
    return {
        "generator": GENERATOR_NAME,
        "stream_rule": STREAM_RULE,
        "seed": spec.seed,
        "n_trades": spec.n_trades,
        "format": fmt.model_dump(mode="json"),
        "spec": spec.model_dump(mode="json"),
    }


def write_tape_with_metadata(
    ticks: Sequence[TradeTick],
    spec: TapeSpec,
    path: Union[str, Path],
    fmt: Optional[TapeFormat] = None,
) -> Path:
    """
    Write the canonical tape to `path` and its metadata to `<path>.meta.json`.

    Returns:
        Path of the metadata sidecar
    """
    fmt = fmt or TapeFormat()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(write_tape(ticks, fmt))
    sidecar = path.with_name(path.name + ".meta.json")
    sidecar.write_text(json.dumps(metadata(spec, fmt), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("Wrote %d trades to %s", len(ticks), path)
    return sidecar
