"""
Speed limits of Bayesian linear regression.

The finite problem has the prior N(0, (lambda d)^-1 I) and the Gibbs posterior
N(mu_T, beta^-1 Sigma_T) with Sigma_T = (X X^T + c_n I)^-1, c = lambda / beta,
c_n = c d. Entropy production is reported per sample, as (n beta)^-1 R.

For d, n -> infinity with d / n -> gamma the spectrum of X X^T / n follows the
Marchenko-Pastur law rho, and T_SL becomes a ratio of rho-integrals.
"""

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike

from tslim.constants import DEFAULT_MP_NODES, NORMALIZATION_PER_SAMPLE
from tslim.core import (
    GaussianMeasure,
    QuadraticPotential,
    SpeedLimitReport,
    frozen_array,
)
from tslim.errors import NumericalError, ValidationError
from tslim.quadrature import legendre_nodes, spectral_sum
from tslim.thermo import EntropyEstimate, EntropyMethod
from tslim.typedefs import Matrix, Vector

logger = getLogger(__name__)

# Below this u, u - log(1 + u) is evaluated by its Taylor series
SERIES_CUTOFF = 1e-3


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0 or not math.isfinite(value):
            raise ValidationError(f"{name}: must be positive and finite, got {value}")


@dataclass(frozen=True, eq=False)
class LinRegProblem:
    X: Matrix  # d x n design
    y: Vector
    lam: float  # weight decay intensity
    beta: float
    alpha: float = 1.0  # teacher variance scale
    theta_star: Vector | None = None

    def __post_init__(self) -> None:
        X = frozen_array(self.X, "X", ndim=2)
        y = frozen_array(self.y, "y", ndim=1)
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValidationError(f"X: d and n must be at least 1, got {X.shape}")
        if y.size != X.shape[1]:
            raise ValidationError(
                f"y: length {y.size} does not match the {X.shape[1]} columns of X"
            )
        _check_positive(lam=self.lam, beta=self.beta, alpha=self.alpha)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.theta_star is not None:
            theta_star = frozen_array(self.theta_star, "theta_star", ndim=1)
            if theta_star.size != X.shape[0]:
                raise ValidationError(
                    f"theta_star: dimension {theta_star.size} does not match d = "
                    f"{X.shape[0]}"
                )
            object.__setattr__(self, "theta_star", theta_star)

    @property
    def d(self) -> int:
        return int(self.X.shape[0])

    @property
    def n(self) -> int:
        return int(self.X.shape[1])

    @property
    def c(self) -> float:
        return self.lam / self.beta

    @property
    def c_n(self) -> float:
        return self.c * self.d

    @cached_property
    def gram_eigh(self) -> tuple[Vector, Matrix]:
        """Eigenvalues (clamped at 0) and eigenvectors of X X^T."""
        eigenvalues, eigenvectors = np.linalg.eigh(self.X @ self.X.T)
        return np.maximum(eigenvalues, 0.0), eigenvectors

    @cached_property
    def projected_targets(self) -> Vector:
        """Coordinates of X y in the eigenbasis of X X^T."""
        return self.gram_eigh[1].T @ (self.X @ self.y)


def generate_teacher_problem(
    d: int, n: int, lam: float, beta: float, alpha: float, seed: int
) -> LinRegProblem:
    """Standard normal design, teacher weights N(0, alpha/d I), noiseless targets."""
    if d < 1 or n < 1:
        raise ValidationError(f"d, n: must be at least 1, got d={d}, n={n}")
    _check_positive(lam=lam, beta=beta, alpha=alpha)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, n))
    theta_star = rng.normal(0.0, math.sqrt(alpha / d), size=d)
    return LinRegProblem(
        X=X, y=X.T @ theta_star, lam=lam, beta=beta, alpha=alpha, theta_star=theta_star
    )


def prior(p: LinRegProblem) -> GaussianMeasure:
    return GaussianMeasure(np.zeros(p.d), np.eye(p.d) / (p.lam * p.d))


def posterior(p: LinRegProblem) -> GaussianMeasure:
    eigenvalues, eigenvectors = p.gram_eigh
    inverse = 1.0 / (eigenvalues + p.c_n)
    mean = eigenvectors @ (inverse * p.projected_targets)
    sigma_t = (eigenvectors * inverse) @ eigenvectors.T
    return GaussianMeasure(mean, sigma_t / p.beta)


def linreg_potential(p: LinRegProblem) -> QuadraticPotential:
    """Potential whose Gibbs measure at inverse temperature beta is the posterior."""
    return QuadraticPotential(
        A=p.X @ p.X.T + p.c_n * np.eye(p.d),
        b=p.X @ p.y,
        c=0.5 * float(p.y @ p.y),
    )


def log_partition_init(lam: float, d: int) -> float:
    _check_positive(lam=lam, d=d)
    return 0.5 * d * math.log(2 * math.pi / (lam * d))


def log_partition_final(p: LinRegProblem) -> float:
    eigenvalues, _ = p.gram_eigh
    shifted = eigenvalues + p.c_n
    log_det_sigma = -spectral_sum(np.log(shifted))
    fit = spectral_sum(p.projected_targets**2 / shifted)
    return (
        0.5 * (log_det_sigma + p.d * math.log(2 * math.pi / p.beta))
        - 0.5 * p.beta * float(p.y @ p.y)
        + 0.5 * p.beta * fit
    )


def mean_initial_loss(p: LinRegProblem) -> float:
    """Mean of 1/2 |y - X^T theta|^2 over the prior."""
    return 0.5 * float(p.y @ p.y) + float(np.sum(p.X**2)) / (2 * p.lam * p.d)


def entropy_linreg(p: LinRegProblem) -> EntropyEstimate:
    """Per-sample entropy production (n beta)^-1 R of the switch prior -> posterior."""
    value = (
        log_partition_final(p) - log_partition_init(p.lam, p.d)
    ) / (p.n * p.beta) + mean_initial_loss(p) / p.n
    return EntropyEstimate(value, EntropyMethod.EQUILIBRIUM, None)


def w2_linreg(p: LinRegProblem) -> float:
    """Squared W2 between prior and posterior, using that the prior is isotropic."""
    eigenvalues, _ = p.gram_eigh
    shifted = eigenvalues + p.c_n
    mean = posterior(p).mean
    value = (
        float(mean @ mean)
        + 1.0 / p.lam
        + spectral_sum(1.0 / shifted) / p.beta
        - 2.0 * spectral_sum(shifted**-0.5) / math.sqrt(p.beta * p.lam * p.d)
    )
    return max(0.0, value)


def tsl_finite(p: LinRegProblem) -> SpeedLimitReport:
    entropy = entropy_linreg(p).value
    if not entropy > 0:
        raise NumericalError(
            f"entropy production {entropy:.6g} is not positive, T_SL is undefined"
        )
    return SpeedLimitReport.from_transport(
        horizon_t=None,
        w2_sq=w2_linreg(p),
        entropy=entropy,
        entropy_normalization=NORMALIZATION_PER_SAMPLE,
    )


def tsl_finite_average(
    d: int,
    n: int,
    lam: float,
    beta: float,
    alpha: float,
    seeds: Sequence[int],
) -> tuple[float, list[SpeedLimitReport]]:
    """Seed average of T_SL over teacher problems, summed in the order of seeds."""
    if not seeds:
        raise ValidationError("seeds: at least one seed is required")
    reports = []
    for seed in seeds:
        logger.debug(f"finite linear regression d={d} n={n} seed={seed}")
        problem = generate_teacher_problem(d, n, lam, beta, alpha, seed)
        reports.append(tsl_finite(problem))
    t_sl = [report.t_sl for report in reports if report.t_sl is not None]
    return math.fsum(t_sl) / len(t_sl), reports


def sample_wishart_spectrum(d: int, n: int, seed: int) -> Vector:
    """Eigenvalues of X X^T / n for a standard normal d x n design."""
    if d < 1 or n < 1:
        raise ValidationError(f"d, n: must be at least 1, got d={d}, n={n}")
    X = np.random.default_rng(seed).standard_normal((d, n))
    return np.linalg.eigvalsh(X @ X.T / n)


@dataclass(frozen=True)
class MPParams:
    gamma: float
    lam: float
    beta: float
    alpha: float

    def __post_init__(self) -> None:
        _check_positive(
            gamma=self.gamma, lam=self.lam, beta=self.beta, alpha=self.alpha
        )

    @property
    def c(self) -> float:
        return self.lam / self.beta


@dataclass(frozen=True)
class MPSupport:
    gamma_minus: float
    gamma_plus: float
    atom_weight: float  # mass at 0, positive for gamma > 1


def mp_support(gamma: float) -> MPSupport:
    _check_positive(gamma=gamma)
    root = math.sqrt(gamma)
    return MPSupport(
        gamma_minus=(1 - root) ** 2,
        gamma_plus=(1 + root) ** 2,
        atom_weight=max(0.0, 1 - 1 / gamma),
    )


def mp_density(x: ArrayLike, gamma: float) -> float | np.ndarray:
    """Continuous part of the Marchenko-Pastur density, 0 outside its support."""
    support = mp_support(gamma)
    xs = np.asarray(x, dtype=np.float64)
    inside = (xs > support.gamma_minus) & (xs < support.gamma_plus) & (xs > 0)
    safe = np.where(inside, xs, 1.0)
    product = np.maximum(
        (support.gamma_plus - safe) * (safe - support.gamma_minus), 0.0
    )
    density = np.where(inside, np.sqrt(product) / (2 * math.pi * gamma * safe), 0.0)
    return float(density) if density.ndim == 0 else density


def mp_integral(
    f: Callable[[np.ndarray], np.ndarray],
    gamma: float,
    n_nodes: int = DEFAULT_MP_NODES,
) -> float:
    """
    Integral of a vectorized f against rho.

    The continuous part uses s = m + h cos(phi) on [0, pi], which turns
    nu(s) ds into h^2 sin^2(phi) / (2 pi gamma s) dphi and removes the square-root
    endpoint behaviour, followed by Gauss-Legendre quadrature. The atom adds
    (1 - 1/gamma) f(0) for gamma > 1.
    """
    support = mp_support(gamma)
    nodes, weights = legendre_nodes(n_nodes)
    phi = 0.5 * math.pi * (nodes + 1.0)
    half_width = 0.5 * (support.gamma_plus - support.gamma_minus)
    centre = 0.5 * (support.gamma_plus + support.gamma_minus)
    s = centre + half_width * np.cos(phi)
    values = np.broadcast_to(np.asarray(f(s), dtype=np.float64), s.shape)
    if not np.all(np.isfinite(values)):
        raise NumericalError(
            f"integrand is not finite on the support [{support.gamma_minus:.6g}, "
            f"{support.gamma_plus:.6g}]"
        )
    jacobian = half_width**2 * np.sin(phi) ** 2 / (2 * math.pi * gamma * s)
    total = 0.5 * math.pi * spectral_sum(weights * values * jacobian)
    if support.atom_weight > 0:
        at_zero = float(np.asarray(f(np.zeros(1)), dtype=np.float64).ravel()[0])
        if not math.isfinite(at_zero):
            raise NumericalError("integrand is not finite at the atom s = 0")
        total += support.atom_weight * at_zero
    return total


def _one_minus_inv_sqrt(u: np.ndarray) -> np.ndarray:
    """1 - (1 + u)^(-1/2) without cancellation."""
    root = np.sqrt(1 + u)
    return u / (root * (1 + root))


def _u_minus_log1p(u: np.ndarray) -> np.ndarray:
    series = u**2 * (1 / 2 - u * (1 / 3 - u * (1 / 4 - u / 5)))
    return np.where(u < SERIES_CUTOFF, series, u - np.log1p(u))


@dataclass(frozen=True)
class AsymptoticTerms:
    numerator: float  # limit of W2
    denominator: float  # limit of the per-sample entropy production


def asymptotic_terms(
    mp: MPParams, mean_shift: bool = True, n_nodes: int = DEFAULT_MP_NODES
) -> AsymptoticTerms:
    """
    W2 and entropy limits as rho-integrals with u = s / (gamma c):
    W2 -> lambda^-1 int (1 - (1 + u)^-1/2)^2 + alpha int s^2 / (c gamma + s)^2,
    entropy -> gamma / (2 beta) int (u - ln(1 + u)) [+ alpha/2 int s^2 / (c gamma + s)].
    The bracketed term is the contribution of the posterior mean shift.
    """
    c, gamma = mp.c, mp.gamma

    def scaled(s: np.ndarray) -> np.ndarray:
        return s / (gamma * c)

    numerator = mp_integral(
        lambda s: _one_minus_inv_sqrt(scaled(s)) ** 2, gamma, n_nodes
    ) / mp.lam + mp.alpha * mp_integral(
        lambda s: s**2 / (c * gamma + s) ** 2, gamma, n_nodes
    )
    denominator = (gamma / (2 * mp.beta)) * mp_integral(
        lambda s: _u_minus_log1p(scaled(s)), gamma, n_nodes
    )
    if mean_shift:
        denominator += 0.5 * mp.alpha * mp_integral(
            lambda s: s**2 / (c * gamma + s), gamma, n_nodes
        )
    return AsymptoticTerms(numerator=numerator, denominator=denominator)


def tsl_asymptotic(
    mp: MPParams, mean_shift: bool = True, n_nodes: int = DEFAULT_MP_NODES
) -> float:
    terms = asymptotic_terms(mp, mean_shift, n_nodes)
    if not terms.denominator > 0:
        raise NumericalError(
            f"asymptotic entropy {terms.denominator:.6g} is not positive "
            f"(W2 limit {terms.numerator:.6g})"
        )
    return terms.numerator / terms.denominator


class LimitKind(StrEnum):
    BETA_INF = "beta_inf"
    BETA_ZERO = "beta_zero"
    N_INF = "n_inf"
    D_INF = "d_inf"


def tsl_limits(
    mp: MPParams, which: LimitKind | str, mean_shift: bool = True
) -> float:
    """
    Closed-form limits of tsl_asymptotic. With the mean-shift term: beta -> inf gives
    2 min(1, 1/gamma) / int s, gamma -> 0 gives 2. Without it both carry an extra
    factor 1 + alpha lambda. beta -> 0 and gamma -> inf give 0 either way.

    The gamma -> 0 value is 2 (mean shift) or 2 (1 + alpha lambda) (no mean shift),
    never 2 lambda alpha: the W2 limit 1/lambda + alpha is divided by the entropy
    limit 1/(2 lambda) + alpha/2, so lambda and alpha cancel when the mean shift is
    kept. For gamma > 1 the beta -> inf limit carries the atom factor 1/gamma, so
    at gamma = 1e3 the formula without mean shift gives 2 (1 + alpha lambda) / gamma
    at low temperature and tends to 0 at beta = 1 as gamma grows.
    """
    try:
        kind = LimitKind(which)
    except ValueError as e:
        raise ValidationError(
            f"which: unknown limit {which!r}, expected one of "
            f"{', '.join(k.value for k in LimitKind)}"
        ) from e
    factor = 1.0 if mean_shift else 1.0 + mp.alpha * mp.lam
    match kind:
        case LimitKind.BETA_INF:
            mean_eigenvalue = mp_integral(lambda s: s, mp.gamma)
            return 2 * factor * min(1.0, 1 / mp.gamma) / mean_eigenvalue
        case LimitKind.N_INF:
            return 2 * factor
        case LimitKind.BETA_ZERO | LimitKind.D_INF:
            return 0.0
