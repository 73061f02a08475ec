"""
Cumulant approximations F_k of the price characteristic function and the
price densities they imply.

    F_k(x) = exp( sum_{m=1..k} (i**m / m!) a_m x**m ),  k in {1, 2, 3}

with a_1 the mean, a_2 the variance and a_3 the third central moment. The
density is the inverse transform eta(p) = (1/2pi) int F(x) exp(-ipx) dx,
computed in closed form for k = 2 and by quadrature for k = 3.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import czt

from src.errors import (
    BadGrid,
    DataError,
    InsufficientMoments,
    NegativeVariance,
    QuadratureFailure,
    UsageError,
    ZeroVariance,
)
from src.price_moments import PriceMoments

logger = logging.getLogger(__name__)

SUPPORTED_ORDERS = (1, 2, 3)
DENSITY_ORDERS = (2, 3)

# |F_k(x)| = exp(-a_2 x**2 / 2) < exp(-72) beyond x = 12 / sigma.
CUTOFF_SIGMAS = 12.0
MIN_NODES = 4096
QUADRATURE_TOLERANCE = 1e-5
DEFAULT_GRID_POINTS = 4097
DEFAULT_GRID_SIGMAS = 6.0

Real = Union[float, np.ndarray]


@dataclass(frozen=True)
class CharFnApprox:
    """Order k and coefficients a_1..a_k of F_k."""

    order: int
    coefficients: Tuple[float, ...]

    def __post_init__(self):
        if self.order not in SUPPORTED_ORDERS:
            raise UsageError(f"order must be one of {SUPPORTED_ORDERS}, got {self.order}")
        coefficients = tuple(float(a) for a in self.coefficients)
        if len(coefficients) != self.order:
            raise DataError(f"order {self.order} needs {self.order} coefficients, got {len(coefficients)}")
        if any(not math.isfinite(a) for a in coefficients):
            raise DataError("coefficients must be finite")
        if self.order >= 2 and coefficients[1] < 0:
            raise NegativeVariance(f"a_2 must be non-negative, got {coefficients[1]!r}")
        object.__setattr__(self, "coefficients", coefficients)

    @property
    def mean(self) -> float:
        return self.coefficients[0]

    @property
    def variance(self) -> float:
        return self.coefficients[1] if self.order >= 2 else 0.0

    @property
    def third_cumulant(self) -> float:
        return self.coefficients[2] if self.order >= 3 else 0.0

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class DensityApprox:
    """
    Samples of eta_k on a price grid.

    `raw_density` is the inversion before negative lobes are clipped;
    `clipped_mass` is the absolute mass of those lobes (0 for k <= 2).
    """

    order: int
    coefficients: Tuple[float, ...]
    grid: np.ndarray
    density: np.ndarray
    raw_density: np.ndarray
    clipped_mass: float = 0.0
    quadrature_error: float = 0.0

    @property
    def mass(self) -> float:
        return float(trapezoid(self.density, self.grid))

    @property
    def raw_mass(self) -> float:
        return float(trapezoid(self.raw_density, self.grid))


def fit_charfn(moments: PriceMoments, k: int) -> CharFnApprox:
    """
    Match the first k price moments with the cumulant coefficients of F_k.

    Args:
        moments: Price moments of a window (n_max >= k)
        k: Approximation order, 1, 2 or 3

    Returns:
        CharFnApprox whose n-th derivative at 0 equals i**n p(n) for n <= k

    Raises:
        InsufficientMoments: fewer than k moments are available
        NegativeVariance: p(2) - p(1)**2 is negative beyond rounding
    """
    if k not in SUPPORTED_ORDERS:
        raise UsageError(f"order must be one of {SUPPORTED_ORDERS}, got {k}")
    if moments.n_max < k:
        raise InsufficientMoments(f"order {k} needs {k} price moments, only {moments.n_max} available")
    if k >= 2 and not moments.consistent:
        raise NegativeVariance(
            f"p(2) - p(1)^2 = {moments.raw_variance!r} is negative; no characteristic function matches"
        )

    coefficients = [moments.p[0]]
    if k >= 2:
        coefficients.append(moments.variance)
    if k >= 3:
        # A point mass has no cumulants beyond the first.
        coefficients.append(moments.third_cumulant if moments.variance > 0 else 0.0)
    return CharFnApprox(k, tuple(coefficients))


def eval_charfn(approx: CharFnApprox, x: Real) -> Union[complex, np.ndarray]:
    """
    Evaluate F_k at real x (scalar or array).

    The modulus is exp(-a_2 x**2 / 2); odd coefficients only rotate the phase.
    """
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise DataError("characteristic function argument must be finite")
    phase = approx.mean * xs - approx.third_cumulant * xs ** 3 / 6.0
    modulus = np.exp(-approx.variance * xs ** 2 / 2.0)
    value = modulus * (np.cos(phase) + 1j * np.sin(phase))
    if value.ndim == 0:
        return complex(value)
    return value


def finite_difference_moment(approx: CharFnApprox, n: int, step: Optional[float] = None) -> float:
    """
    Estimate i**-n d^n F_k / dx^n at 0 by central differences with one
    Richardson extrapolation step (h and h/2).

    The default step is 0.01 / (|a_1| + sigma), keeping the phase change per
    step small whatever the price level. Its error is bounded relative to
    (|a_1| + sigma)**n, not to p(n) itself; moment-matching checks compare
    |estimate - p(n)| / (|a_1| + sigma)**n against 1e-5.
    """
    if n not in (1, 2, 3):
        raise UsageError(f"derivative order must be 1, 2 or 3, got {n}")
    if step is None:
        scale = abs(approx.mean) + approx.sigma
        step = 0.01 / scale if scale > 0 else 0.01

    def F(x: float) -> complex:
        return eval_charfn(approx, x)

    def stencil(h: float) -> complex:
        if n == 1:
            return (F(h) - F(-h)) / (2.0 * h)
        if n == 2:
            return (F(h) - 2.0 * F(0.0) + F(-h)) / (h * h)
        return (F(2 * h) - 2.0 * F(h) + 2.0 * F(-h) - F(-2 * h)) / (2.0 * h ** 3)

    derivative = (4.0 * stencil(step / 2.0) - stencil(step)) / 3.0
    return float(((1j) ** (-n) * derivative).real)


def _check_grid(grid: Sequence[float]) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise BadGrid("grid must be a non-empty 1-d array")
    if not np.all(np.isfinite(grid)):
        raise BadGrid("grid points must be finite")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise BadGrid("grid must be strictly increasing")
    return grid


def make_grid(
    approx: CharFnApprox,
    points: int = DEFAULT_GRID_POINTS,
    sigmas: float = DEFAULT_GRID_SIGMAS,
) -> np.ndarray:
    """Uniform grid of `points` prices spanning a_1 +/- sigmas * sigma."""
    if approx.order < 2 or approx.variance <= 0:
        raise ZeroVariance("a grid needs a positive variance")
    if points < 2 or not sigmas > 0:
        raise BadGrid("grid needs at least two points and a positive half-width")
    half = sigmas * approx.sigma
    return np.linspace(approx.mean - half, approx.mean + half, int(points))


def _require_density_order(approx: CharFnApprox) -> None:
    if approx.order not in DENSITY_ORDERS:
        raise UsageError(f"order {approx.order} has no density; use k in {DENSITY_ORDERS}")
    if approx.variance == 0:
        raise ZeroVariance("variance is zero: the price distribution is a point mass")


def gaussian_density(approx: CharFnApprox, grid: Sequence[float]) -> DensityApprox:
    """
    Closed-form Gaussian density of F_2 sampled on `grid`.

    Raises:
        ZeroVariance: a_2 == 0
    """
    if approx.order != 2:
        raise UsageError(f"the closed-form density needs k = 2, got {approx.order}")
    _require_density_order(approx)
    grid = _check_grid(grid)
    mean, variance = approx.mean, approx.variance
    density = np.exp(-((grid - mean) ** 2) / (2.0 * variance)) / math.sqrt(2.0 * math.pi * variance)
    return DensityApprox(2, approx.coefficients, grid, density, density.copy())


def _is_uniform(grid: np.ndarray) -> bool:
    if grid.size < 3:
        return True
    steps = np.diff(grid)
    return bool(np.allclose(steps, steps.mean(), rtol=1e-9, atol=0.0))


def _inversion_sum(shifted: np.ndarray, values: np.ndarray, dx: float) -> np.ndarray:
    """
    (dx / pi) * Re sum_j values_j exp(-i q x_j) with x_j = j dx.

    Uniform q uses the chirp-z transform; other grids are summed directly in
    blocks.
    """
    m = values.size
    if _is_uniform(shifted) and shifted.size > 1:
        dq = (shifted[-1] - shifted[0]) / (shifted.size - 1)
        x = np.arange(m) * dx
        weighted = values * np.exp(-1j * shifted[0] * x)
        total = czt(weighted, m=shifted.size, w=np.exp(-1j * dq * dx), a=1.0)
        return dx / math.pi * total.real

    x = np.arange(m) * dx
    out = np.empty(shifted.size)
    block = 256
    for start in range(0, shifted.size, block):
        q = shifted[start:start + block, None]
        out[start:start + block] = (values[None, :] * np.exp(-1j * q * x[None, :])).real.sum(axis=1)
    return dx / math.pi * out


def invert_charfn(approx: CharFnApprox, grid: Sequence[float]) -> DensityApprox:
    """
    Density of F_k on `grid` by numerical Fourier inversion.

    eta(p) = (1/pi) int_0^X Re[F_k(x) exp(-ipx)] dx with X = 12 / sigma,
    trapezoid rule on a power-of-two node count >= 4096. The quadrature is
    repeated on every other node; the largest difference is the error
    estimate. For k = 3 negative lobes are clipped, their mass is reported
    and the remaining density renormalised.

    Raises:
        ZeroVariance: a_2 == 0
        QuadratureFailure: the error estimate exceeds 1e-5
    """
    _require_density_order(approx)
    grid = _check_grid(grid)
    sigma = approx.sigma
    cutoff = CUTOFF_SIGMAS / sigma

    # Work relative to the mean; the trapezoid rule aliases eta with period
    # 2 pi / dx, which must clear the grid plus the density's tails.
    shifted = grid - approx.mean
    reach = float(np.max(np.abs(shifted))) + 4.0 * CUTOFF_SIGMAS * sigma
    # Doubled so the half-resolution pass used for the error estimate clears it too.
    needed = int(math.ceil(2.0 * cutoff * reach / (2.0 * math.pi)))
    nodes = max(MIN_NODES, 1 << max(needed - 1, 1).bit_length())
    dx = cutoff / nodes

    x = np.arange(nodes) * dx
    centered = CharFnApprox(
        approx.order,
        (0.0,) + approx.coefficients[1:],
    )
    values = eval_charfn(centered, x)
    values[0] *= 0.5

    fine = _inversion_sum(shifted, values, dx)
    coarse = _inversion_sum(shifted, values[::2], 2.0 * dx)
    error = float(np.max(np.abs(fine - coarse)))
    if not np.all(np.isfinite(fine)) or error > QUADRATURE_TOLERANCE:
        raise QuadratureFailure(f"inversion error estimate {error:.3g} exceeds {QUADRATURE_TOLERANCE}")

    raw = fine
    if approx.order == 2:
        return DensityApprox(2, approx.coefficients, grid, np.maximum(raw, 0.0), raw, 0.0, error)

    # Negatives at rounding level are zeroed without being counted as clipped.
    floor = 1e-12 * float(np.max(np.abs(raw)))
    negative = np.where(raw < -floor, raw, 0.0)
    clipped = np.maximum(raw, 0.0)
    clipped_mass = float(trapezoid(-negative, grid)) if grid.size > 1 else 0.0
    if clipped_mass > 0:
        mass = float(trapezoid(clipped, grid))
        if mass > 0:
            clipped = clipped / mass
        logger.warning("Clipped negative density lobes of total mass %.3g", clipped_mass)
    return DensityApprox(3, approx.coefficients, grid, clipped, raw, clipped_mass, error)


def density(approx: CharFnApprox, grid: Sequence[float]) -> DensityApprox:
    """Closed form for k = 2, numerical inversion for k = 3."""
    if approx.order == 2:
        return gaussian_density(approx, grid)
    return invert_charfn(approx, grid)


def grid_moments(approx_density: DensityApprox, n_max: int = 3, raw: bool = True) -> Tuple[float, ...]:
    """
    Raw moments int p**n eta(p) dp, n = 1..n_max, by the trapezoid rule.

    Uses the pre-clipping density when `raw` is True.
    """
    values = approx_density.raw_density if raw else approx_density.density
    grid = approx_density.grid
    return tuple(float(trapezoid(grid ** n * values, grid)) for n in range(1, n_max + 1))
