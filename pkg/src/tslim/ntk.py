"""
Closed-form gradient-flow dynamics of a linearized model in the eigenbasis of its
neural tangent kernel.

Mode k relaxes as Delta_k(t) = exp(-lambda_k t) Delta_k(0). The loss uses the
half-MSE convention L = 1/2 sum_k Delta_k^2, so the loss drop up to t is
1/2 sum_k Delta_k^2 (1 - exp(-2 lambda_k t)).
"""

import math
from dataclasses import dataclass
from enum import StrEnum
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike
from scipy import stats

from tslim.constants import CURVE_DECADES, DEFAULT_N_QUAD
from tslim.core import QuadraticPotential, SpectralModel, SpeedLimitReport
from tslim.errors import NumericalError, ValidationError
from tslim.quadrature import (
    chunked_mode_sum,
    cumulative,
    refined_time_grid,
    simpson,
    spectral_sum,
)
from tslim.typedefs import Vector

logger = getLogger(__name__)

# |x| or |x + 1| below this counts as a regime boundary
BOUNDARY_ATOL = 1e-12


class Regime(StrEnum):
    OPTIMAL = "optimal"
    SUBOPTIMAL = "suboptimal"
    BOUNDARY = "boundary"
    OUT_OF_DOMAIN = "out_of_domain"


@dataclass(frozen=True)
class ScalingPrediction:
    regime: Regime
    w2_exponent: float
    entropy_exponent: float
    tsl_exponent: float
    length_exponent: float


def _check_time(t: float) -> None:
    if not t >= 0:
        raise ValidationError(f"t: must be non-negative, got {t}")


def _growth(model: SpectralModel, t: float, rate: float = 1.0) -> Vector:
    """1 - exp(-rate lambda t) per mode, accurate for small arguments."""
    if math.isinf(t):
        return np.ones(model.n)
    return -np.expm1(-rate * model.eigenvalues * t)


def residue_at(model: SpectralModel, t: float) -> Vector:
    _check_time(t)
    return np.exp(-model.eigenvalues * t) * np.sqrt(model.residues_sq)


def displacement_sq(model: SpectralModel, t: float) -> float:
    """sum_k (1 - exp(-lambda_k t))^2 Delta_k^2 / lambda_k."""
    _check_time(t)
    return spectral_sum(
        _growth(model, t) ** 2 * model.residues_sq / model.eigenvalues
    )


def loss_drop(model: SpectralModel, t: float) -> float:
    _check_time(t)
    return 0.5 * spectral_sum(model.residues_sq * _growth(model, t, rate=2.0))


def inefficiency_ratio(model: SpectralModel, t: float) -> float:
    """T_SL(t) / t."""
    if not t > 0:
        raise ValidationError(f"t: must be positive, got {t}")
    if not np.any(model.residues_sq > 0):
        raise NumericalError(
            "residues_sq: all residues are zero, the ratio is undefined"
        )
    numerator = spectral_sum(
        _growth(model, t) ** 2 * model.residues_sq / model.eigenvalues
    )
    denominator = spectral_sum(model.residues_sq * _growth(model, t, rate=2.0))
    return (2.0 / t) * numerator / denominator


def _speed(model: SpectralModel, times: ArrayLike) -> Vector:
    """|d theta/dt| = sqrt(sum_k lambda_k exp(-2 lambda_k t) Delta_k^2)."""
    weights = model.eigenvalues * model.residues_sq
    rates = 2.0 * model.eigenvalues
    speed_sq = chunked_mode_sum(times, lambda t: weights * np.exp(-rates * t))
    return np.sqrt(np.maximum(speed_sq, 0.0))


def path_length_gamma(
    model: SpectralModel, t: float, n_quad: int = DEFAULT_N_QUAD
) -> float:
    """Arc length travelled in weight space up to t."""
    _check_time(t)
    if t == 0:
        return 0.0
    nodes = refined_time_grid(t, n_quad)
    return simpson(_speed(model, nodes), nodes)


def path_length_curve(
    model: SpectralModel, ts: ArrayLike, n_quad: int = DEFAULT_N_QUAD
) -> Vector:
    """
    Arc length at each horizon in ts from one cumulative Simpson pass over
    0, n_quad + 1 log-spaced nodes from min(ts) * 1e-8 to max(ts), and ts itself.
    """
    horizons = np.asarray(ts, dtype=np.float64)
    if horizons.ndim != 1 or horizons.size == 0:
        raise ValidationError("ts: must be a non-empty 1-D sequence of times")
    if np.any(horizons < 0) or not np.all(np.isfinite(horizons)):
        raise ValidationError("ts: times must be finite and non-negative")
    positive = horizons[horizons > 0]
    if positive.size == 0:
        return np.zeros(horizons.size)
    t_low = positive.min() * 10.0**-CURVE_DECADES
    nodes = np.unique(
        np.concatenate(
            ([0.0], np.geomspace(t_low, positive.max(), n_quad + 1), horizons)
        )
    )
    lengths = cumulative(_speed(model, nodes), nodes)
    return lengths[np.searchsorted(nodes, horizons)]


def path_length_geo(model: SpectralModel, t: float) -> float:
    return math.sqrt(displacement_sq(model, t))


def predicted_exponents(alpha: float, delta: float) -> ScalingPrediction:
    """
    Large-time exponents of W2, entropy, T_SL and path length for power-law
    spectra, from x = (1 - delta) / alpha.
    """
    if not alpha > 0:
        raise ValidationError(f"alpha: must be positive, got {alpha}")
    if not delta >= 0:
        raise ValidationError(f"delta: must be non-negative, got {delta}")
    x = (1.0 - delta) / alpha
    if abs(x) <= BOUNDARY_ATOL or abs(x + 1) <= BOUNDARY_ATOL:
        regime = Regime.BOUNDARY
    elif 0 < x <= 1:
        regime = Regime.OPTIMAL
    elif -1 < x < 0:
        regime = Regime.SUBOPTIMAL
    else:
        nan = float("nan")
        return ScalingPrediction(Regime.OUT_OF_DOMAIN, nan, nan, nan, nan)
    w2_exponent = x + 1
    entropy_exponent = max(x, 0.0)
    return ScalingPrediction(
        regime=regime,
        w2_exponent=w2_exponent,
        entropy_exponent=entropy_exponent,
        tsl_exponent=w2_exponent - entropy_exponent,
        length_exponent=(x + 1) / 2,
    )


def fit_loglog_slope(ts: ArrayLike, ys: ArrayLike) -> float:
    """Least-squares slope of ln y against ln t."""
    times = np.asarray(ts, dtype=np.float64)
    values = np.asarray(ys, dtype=np.float64)
    if times.shape != values.shape or times.ndim != 1:
        raise ValidationError(
            f"ts, ys: expected equal 1-D shapes, got {times.shape} and {values.shape}"
        )
    if times.size < 3:
        raise ValidationError(f"ts: at least 3 points are required, got {times.size}")
    if np.any(times <= 0) or np.any(values <= 0):
        raise ValidationError("ts, ys: all values must be positive for a log-log fit")
    return float(stats.linregress(np.log(times), np.log(values)).slope)


def ntk_report(
    model: SpectralModel, t: float, l_gamma: float | None = None
) -> SpeedLimitReport:
    return SpeedLimitReport.from_transport(
        horizon_t=float(t),
        w2_sq=displacement_sq(model, t),
        entropy=loss_drop(model, t),
        path_length=l_gamma,
        dirac=True,
    )


def scaling_sweep(
    model: SpectralModel, ts: ArrayLike, n_quad: int = DEFAULT_N_QUAD
) -> list[SpeedLimitReport]:
    horizons = np.asarray(ts, dtype=np.float64)
    lengths = path_length_curve(model, horizons, n_quad)
    logger.info(f"NTK sweep over {horizons.size} horizons, {model.n} modes")
    return [
        ntk_report(model, float(t), float(length))
        for t, length in zip(horizons, lengths, strict=True)
    ]


def fit_sweep_slopes(reports: list[SpeedLimitReport]) -> dict[str, float]:
    """Fitted log-log exponents of the report quantities against the horizon."""
    ts = [report.horizon_t for report in reports]
    columns = {
        "w2_sq": [report.w2_sq for report in reports],
        "entropy": [report.entropy for report in reports],
        "t_sl": [report.t_sl for report in reports],
        "l_gamma": [report.path_length for report in reports],
        "l_geo": [report.geo_length for report in reports],
    }
    slopes = {}
    for name, values in columns.items():
        if any(value is None for value in values):
            raise ValidationError(f"{name}: undefined in at least one report")
        slopes[name] = fit_loglog_slope(ts, values)
    return slopes


def ntk_potential(model: SpectralModel) -> QuadraticPotential:
    """
    Quadratic potential with A = diag(lambda) and b = sqrt(lambda) Delta(0). Gradient
    flow from theta = 0 reproduces the closed-form displacement and loss drop.
    """
    root_lambda = np.sqrt(model.eigenvalues)
    return QuadraticPotential(
        A=np.diag(model.eigenvalues),
        b=root_lambda * np.sqrt(model.residues_sq),
    )
