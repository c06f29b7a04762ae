"""
Time integration of gradient flow and Langevin dynamics on quadratic potentials, and
exact Gaussian moment propagation of the Ornstein-Uhlenbeck process they define.

The learning rate is fixed to 1: time is continuum training time.
"""

import math
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike

from tslim.constants import (
    LANGEVIN_CHUNK,
    MAX_CHECKPOINTS,
    MONOTONE_ATOL,
    STABILITY_LIMIT,
    STABILITY_WARNING,
)
from tslim.core import GaussianMeasure, QuadraticPotential, Trajectory, frozen_array
from tslim.errors import ConfigError, NumericalError, ValidationError
from tslim.typedefs import Matrix, Vector

logger = getLogger(__name__)

# Noise values drawn per time block of a realization chunk
NOISE_BLOCK_SIZE = 1 << 22


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    T: float
    seed: int = 0
    n_realizations: int = 1
    beta_inv: float = 0.0
    max_checkpoints: int = MAX_CHECKPOINTS

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError(f"dt: must be positive, got {self.dt}")
        if not self.T >= 0 or not math.isfinite(self.T):
            raise ConfigError(f"T: must be finite and non-negative, got {self.T}")
        if self.n_realizations < 1:
            raise ConfigError(
                f"n_realizations: must be at least 1, got {self.n_realizations}"
            )
        if not self.beta_inv >= 0:
            raise ConfigError(f"beta_inv: must be non-negative, got {self.beta_inv}")
        if self.max_checkpoints < 1:
            raise ConfigError(
                f"max_checkpoints: must be at least 1, got {self.max_checkpoints}"
            )

    @property
    def n_steps(self) -> int:
        return n_steps_for(self.T, self.dt)

    @property
    def step(self) -> float:
        """Actual step size T / n_steps, never larger than dt."""
        n = self.n_steps
        return self.T / n if n else 0.0


def n_steps_for(T: float, dt: float) -> int:
    # T / dt can exceed an integer by one ulp, e.g. 0.3 / 0.1
    return math.ceil(T / dt * (1 - 1e-12)) if T > 0 else 0


def stability_check(pot: QuadraticPotential, dt: float) -> float:
    """Return dt * lambda_max, rejecting steps outside the explicit stability region."""
    product = dt * pot.lambda_max
    if product >= STABILITY_LIMIT:
        raise ConfigError(
            f"dt * lambda_max = {product:.6g} >= {STABILITY_LIMIT}: explicit stepping "
            f"is unstable, decrease dt below {STABILITY_LIMIT / pot.lambda_max:.6g}"
        )
    if product > STABILITY_WARNING:
        logger.warning(
            f"dt * lambda_max = {product:.6g} > {STABILITY_WARNING}: the discrete path "
            "may deviate noticeably from the continuous dynamics"
        )
    return product


def checkpoint_indices(
    n_steps: int, max_checkpoints: int = MAX_CHECKPOINTS
) -> np.ndarray:
    stride = max(1, math.ceil(n_steps / max_checkpoints))
    indices = np.arange(0, n_steps + 1, stride)
    if indices[-1] != n_steps:
        indices = np.append(indices, n_steps)
    return indices


def _checked_point(theta: ArrayLike, pot: QuadraticPotential, name: str) -> Vector:
    point = frozen_array(theta, name, ndim=1)
    if point.size != pot.dim:
        raise ValidationError(
            f"{name}: dimension {point.size} does not match potential dimension "
            f"{pot.dim}"
        )
    return point


def simulate_gradient_flow(
    pot: QuadraticPotential, theta0: ArrayLike, cfg: IntegratorConfig
) -> Trajectory:
    """Classical fourth order Runge-Kutta integration of d theta/dt = -grad V."""
    if cfg.beta_inv != 0:
        raise ConfigError(
            f"beta_inv: gradient flow requires beta_inv = 0, got {cfg.beta_inv}; "
            "use simulate_langevin for noisy dynamics"
        )
    theta = np.array(_checked_point(theta0, pot, "theta0"))
    n_steps = cfg.n_steps
    h = cfg.step
    if n_steps:
        stability_check(pot, h)
    keep = checkpoint_indices(n_steps, cfg.max_checkpoints)
    weights = np.empty((keep.size, pot.dim))
    losses = np.empty(keep.size)
    fine_grad_sq = np.empty(n_steps + 1)

    next_keep = 0
    for step in range(n_steps + 1):
        grad = pot.gradient(theta)
        fine_grad_sq[step] = grad @ grad
        if step == keep[next_keep]:
            weights[next_keep] = theta
            losses[next_keep] = pot.loss(theta)
            next_keep += 1
        if step == n_steps:
            break
        k1 = -grad
        k2 = -pot.gradient(theta + 0.5 * h * k1)
        k3 = -pot.gradient(theta + 0.5 * h * k2)
        k4 = -pot.gradient(theta + h * k3)
        theta = theta + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    tolerance = MONOTONE_ATOL * np.maximum(1.0, np.abs(losses[:-1]))
    increases = np.diff(losses) > tolerance
    if np.any(increases):
        logger.warning(
            f"loss increased at {int(increases.sum())} checkpoint(s), "
            f"dt * lambda_max = {h * pot.lambda_max:.3g}"
        )
    fine_times = h * np.arange(n_steps + 1)
    return Trajectory(
        times=fine_times[keep],
        weights=weights,
        losses=losses,
        grad_sq=fine_grad_sq[keep],
        fine_times=fine_times if n_steps else None,
        fine_grad_sq=fine_grad_sq if n_steps else None,
    )


def _sqrt_factor(covariance: Matrix) -> Matrix:
    """L with L L^T = covariance, also for singular covariances."""
    eigenvalues, eigenvectors = np.linalg.eigh(covariance)
    return eigenvectors * np.sqrt(np.maximum(eigenvalues, 0.0))


def simulate_langevin(
    pot: QuadraticPotential,
    init: GaussianMeasure,
    cfg: IntegratorConfig,
    chunk: int = LANGEVIN_CHUNK,
) -> list[Trajectory]:
    """
    Euler-Maruyama ensemble of
    theta_{l+1} = theta_l - grad V(theta_l) h + sqrt(2 beta_inv h) xi_l.

    Realization i draws its initial point and all of its noise from the i-th child of
    SeedSequence(cfg.seed), so the result does not depend on chunk.
    """
    if cfg.beta_inv == 0:
        raise ConfigError(
            "beta_inv: Langevin dynamics requires beta_inv > 0; "
            "use simulate_gradient_flow for beta_inv = 0"
        )
    if init.dim != pot.dim:
        raise ValidationError(
            f"init: dimension {init.dim} does not match potential dimension {pot.dim}"
        )
    if chunk < 1:
        raise ValidationError(f"chunk: must be positive, got {chunk}")
    n_steps = cfg.n_steps
    h = cfg.step
    if n_steps:
        stability_check(pot, h)
    d = pot.dim
    keep = checkpoint_indices(n_steps, cfg.max_checkpoints)
    times = h * keep.astype(np.float64)
    noise_scale = math.sqrt(2 * cfg.beta_inv * h)
    init_factor = _sqrt_factor(init.covariance)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_realizations)

    logger.info(
        f"Langevin ensemble: {cfg.n_realizations} realizations, {n_steps} steps of "
        f"{h:.3g}"
    )
    trajectories: list[Trajectory] = []
    for start in range(0, cfg.n_realizations, chunk):
        rngs = [np.random.default_rng(c) for c in children[start : start + chunk]]
        r = len(rngs)
        theta = np.stack(
            [init.mean + init_factor @ rng.standard_normal(d) for rng in rngs]
        )
        weights = np.empty((r, keep.size, d))
        losses = np.empty((r, keep.size))
        grad_sq = np.empty((r, keep.size))
        block = max(1, NOISE_BLOCK_SIZE // (r * d))
        noise = np.empty((r, 0, d))
        next_keep = 0
        for step in range(n_steps + 1):
            grad = theta @ pot.A - pot.b
            if step == keep[next_keep]:
                weights[:, next_keep] = theta
                losses[:, next_keep] = pot.loss(theta)
                grad_sq[:, next_keep] = np.einsum("ij,ij->i", grad, grad)
                next_keep += 1
            if step == n_steps:
                break
            offset = step % block
            if offset == 0:
                size = min(block, n_steps - step)
                noise = np.stack([rng.standard_normal((size, d)) for rng in rngs])
            theta = theta - h * grad + noise_scale * noise[:, offset]
        trajectories.extend(
            Trajectory(times, weights[i], losses[i], grad_sq=grad_sq[i])
            for i in range(r)
        )
    return trajectories


def ensemble_moments(
    trajectories: list[Trajectory], index: int = -1
) -> GaussianMeasure:
    """Sample mean and unbiased sample covariance of an ensemble at one checkpoint."""
    if len(trajectories) < 2:
        raise ValidationError(
            "trajectories: at least 2 realizations are required, "
            f"got {len(trajectories)}"
        )
    points = np.stack([traj.weights[index] for traj in trajectories])
    covariance = np.atleast_2d(np.cov(points, rowvar=False, ddof=1))
    return GaussianMeasure(points.mean(axis=0), covariance)


def _eigen_growth(eigenvalues: Vector, t: float) -> Vector:
    """(1 - exp(-lambda t)) / lambda, equal to t where lambda = 0."""
    safe = np.where(eigenvalues > 0, eigenvalues, 1.0)
    return np.where(eigenvalues > 0, -np.expm1(-eigenvalues * t) / safe, t)


def propagate_gaussian_ou(
    pot: QuadraticPotential, init: GaussianMeasure, beta_inv: float, t: float
) -> GaussianMeasure:
    """
    Exact law at time t of d theta = -grad V dt + sqrt(2 beta_inv) dB started from a
    Gaussian, computed in the eigenbasis of A.
    """
    if not t >= 0:
        raise ValidationError(f"t: must be non-negative, got {t}")
    if not beta_inv >= 0:
        raise ValidationError(f"beta_inv: must be non-negative, got {beta_inv}")
    if init.dim != pot.dim:
        raise ValidationError(
            f"init: dimension {init.dim} does not match potential dimension {pot.dim}"
        )
    if beta_inv > 0 and not pot.is_positive_definite:
        raise NumericalError(
            f"A is singular (smallest eigenvalue {pot.lambda_min:.3g}): the "
            "stationary covariance is undefined for beta_inv > 0"
        )
    if t == 0:
        return init
    eigenvalues, eigenvectors = pot.eigh()
    decay = np.exp(-eigenvalues * t)
    mean_eig = decay * (eigenvectors.T @ init.mean) + _eigen_growth(
        eigenvalues, t
    ) * (eigenvectors.T @ pot.b)
    cov_eig = decay[:, None] * (eigenvectors.T @ init.covariance @ eigenvectors)
    cov_eig = cov_eig * decay[None, :]
    if beta_inv > 0:
        cov_eig += np.diag(2 * beta_inv * _eigen_growth(2 * eigenvalues, t))
    return GaussianMeasure(
        eigenvectors @ mean_eig, eigenvectors @ cov_eig @ eigenvectors.T
    )


def _geometric_sum(q_n: Vector, one_minus_q: Vector, n: int) -> Vector:
    """sum_{l<n} q^l given q^n and 1 - q."""
    positive = one_minus_q > 0
    return np.where(positive, (1 - q_n) / np.where(positive, one_minus_q, 1.0), n)


def euler_maruyama_moments(
    pot: QuadraticPotential,
    init: GaussianMeasure,
    beta_inv: float,
    dt: float,
    T: float,
) -> GaussianMeasure:
    """
    Exact mean and covariance after ceil(T/dt) Euler-Maruyama steps of size
    T / ceil(T/dt), from the recursions mu <- (I - hA) mu + h b and
    Sigma <- (I - hA) Sigma (I - hA) + 2 beta_inv h I.
    """
    if not dt > 0:
        raise ValidationError(f"dt: must be positive, got {dt}")
    if not T >= 0:
        raise ValidationError(f"T: must be non-negative, got {T}")
    if init.dim != pot.dim:
        raise ValidationError(
            f"init: dimension {init.dim} does not match potential dimension {pot.dim}"
        )
    n = n_steps_for(T, dt)
    if n == 0:
        return init
    h = T / n
    stability_check(pot, h)
    eigenvalues, eigenvectors = pot.eigh()
    ratio = 1 - h * eigenvalues
    ratio_n = ratio**n
    mean_sum = _geometric_sum(ratio_n, h * eigenvalues, n)
    cov_sum = _geometric_sum(ratio_n**2, h * eigenvalues * (2 - h * eigenvalues), n)
    mean_eig = ratio_n * (eigenvectors.T @ init.mean) + h * mean_sum * (
        eigenvectors.T @ pot.b
    )
    cov_eig = ratio_n[:, None] * (eigenvectors.T @ init.covariance @ eigenvectors)
    cov_eig = cov_eig * ratio_n[None, :] + np.diag(2 * beta_inv * h * cov_sum)
    return GaussianMeasure(
        eigenvectors @ mean_eig, eigenvectors @ cov_eig @ eigenvectors.T
    )


def expm_neg(pot: QuadraticPotential, t: float) -> Matrix:
    """exp(-A t) via the eigendecomposition of A."""
    eigenvalues, eigenvectors = pot.eigh()
    return (eigenvectors * np.exp(-eigenvalues * t)) @ eigenvectors.T
