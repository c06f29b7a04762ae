"""
Entropy production estimators, Wasserstein-2 costs, speed limit and inefficiency.

Entropy production is always reported in loss units, i.e. as beta_inv * R, which is
finite for gradient flow (beta_inv = 0) where it equals the drop in loss.
"""

import math
from dataclasses import dataclass
from enum import StrEnum
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate

from tslim.constants import DEFAULT_N_QUAD, ENTROPY_ATOL, PSD_RTOL
from tslim.core import GaussianMeasure, QuadraticPotential, Trajectory, transport_time
from tslim.errors import NumericalError, ValidationError
from tslim.quadrature import refined_time_grid, simpson, spectral_sum
from tslim.typedefs import Matrix

logger = getLogger(__name__)

# Quadrature nodes per batched eigendecomposition
NODE_CHUNK = 256


class EntropyMethod(StrEnum):
    DYNAMIC_GRADIENT_FLOW = "dynamic_gradient_flow"
    DYNAMIC_GAUSSIAN = "dynamic_gaussian"
    EQUILIBRIUM = "equilibrium"
    NTK_LOSS_DROP = "ntk_loss_drop"


@dataclass(frozen=True)
class EntropyEstimate:
    value: float  # beta_inv * R
    method: EntropyMethod
    horizon_t: float | None  # None for comparisons with a stationary endpoint

    def __post_init__(self) -> None:
        if not self.value >= -ENTROPY_ATOL:
            raise NumericalError(
                f"entropy production {self.value:.6g} is negative "
                f"(method {self.method})"
            )


@dataclass(frozen=True)
class EquilibriumTerms:
    ln_z_final: float
    ln_z_init: float
    mean_initial_loss: float


def _check_same_dim(a: int, b: int, what: str) -> None:
    if a != b:
        raise ValidationError(f"{what}: dimension mismatch, {a} != {b}")


def psd_sqrt(matrix: Matrix) -> Matrix:
    """Symmetric square root, negative round-off eigenvalues clamped to 0."""
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    return (eigenvectors * np.sqrt(np.maximum(eigenvalues, 0.0))) @ eigenvectors.T


def w2_gaussian(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """Squared Wasserstein-2 distance between two Gaussian measures."""
    _check_same_dim(p.dim, q.dim, "w2_gaussian")
    shift = p.mean - q.mean
    root_q = psd_sqrt(q.covariance)
    cross = root_q @ p.covariance @ root_q
    cross_eigenvalues = np.linalg.eigvalsh(0.5 * (cross + cross.T))
    trace_cross = spectral_sum(np.sqrt(np.maximum(cross_eigenvalues, 0.0)))
    trace_term = (
        np.trace(p.covariance) + np.trace(q.covariance) - 2.0 * trace_cross
    )
    return max(0.0, float(shift @ shift + trace_term))


def w2_dirac(theta0: ArrayLike, thetaT: ArrayLike) -> float:
    start = np.asarray(theta0, dtype=np.float64)
    end = np.asarray(thetaT, dtype=np.float64)
    if start.shape != end.shape:
        raise ValidationError(
            f"w2_dirac: dimension mismatch, {start.shape} != {end.shape}"
        )
    diff = (end - start).ravel()
    return float(diff @ diff)


def w2_empirical_1d(a: ArrayLike, b: ArrayLike) -> float:
    """Quantile coupling estimate of W2^2 from two equally sized 1-D samples."""
    left = np.sort(np.asarray(a, dtype=np.float64).ravel())
    right = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if left.size == 0 or right.size == 0:
        raise ValidationError("w2_empirical_1d: samples must not be empty")
    if left.size != right.size:
        raise ValidationError(
            f"w2_empirical_1d: sample sizes differ, {left.size} != {right.size}"
        )
    return float(np.mean((left - right) ** 2))


def entropy_dynamic_gradient_flow(traj: Trajectory) -> EntropyEstimate:
    """Trapezoid rule for the integral of |grad V|^2 along a gradient-flow run."""
    if traj.fine_times is not None and traj.fine_grad_sq is not None:
        times, grad_sq = traj.fine_times, traj.fine_grad_sq
    elif traj.grad_sq is not None:
        times, grad_sq = traj.times, traj.grad_sq
    else:
        raise ValidationError(
            "grad_sq: trajectory carries no gradient norms, the dynamic entropy "
            "cannot be evaluated"
        )
    horizon = float(traj.times[-1] - traj.times[0])
    if times.size < 2:
        return EntropyEstimate(0.0, EntropyMethod.DYNAMIC_GRADIENT_FLOW, horizon)
    value = float(integrate.trapezoid(grad_sq, x=times))
    return EntropyEstimate(value, EntropyMethod.DYNAMIC_GRADIENT_FLOW, horizon)


def _gaussian_integrand(
    pot: QuadraticPotential,
    init: GaussianMeasure,
    beta_inv: float,
    nodes: np.ndarray,
) -> np.ndarray:
    """
    <|grad V|^2> - 2 beta_inv <Laplacian V> + beta_inv^2 <|grad ln p|^2> under the
    exact Gaussian law p(., t), evaluated at each node in the eigenbasis of A.
    """
    eigenvalues, eigenvectors = pot.eigh()
    mean0 = eigenvectors.T @ init.mean
    cov0 = eigenvectors.T @ init.covariance @ eigenvectors
    b_eig = eigenvectors.T @ pot.b
    trace_a = spectral_sum(eigenvalues)
    values = np.empty(nodes.size)
    for start in range(0, nodes.size, NODE_CHUNK):
        t = nodes[start : start + NODE_CHUNK, None]
        decay = np.exp(-eigenvalues * t)  # (c, d)
        mean_t = decay * mean0 - np.expm1(-eigenvalues * t) * (b_eig / eigenvalues)
        noise = -beta_inv * np.expm1(-2 * eigenvalues * t) / eigenvalues
        cov_t = decay[:, :, None] * cov0 * decay[:, None, :]
        cov_t[:, np.arange(pot.dim), np.arange(pot.dim)] += noise
        cov_eigenvalues = np.linalg.eigvalsh(cov_t)
        smallest = cov_eigenvalues[:, 0]
        scale = np.maximum(cov_eigenvalues[:, -1], np.finfo(float).tiny)
        singular = smallest <= PSD_RTOL * scale
        if np.any(singular):
            bad = start + int(np.argmax(singular))
            raise NumericalError(
                f"covariance is singular at t = {nodes[bad]:.6g}: the entropy "
                "production diverges, use an initial measure with a larger "
                "(positive definite) covariance"
            )
        drift = eigenvalues * mean_t - b_eig
        grad_term = np.einsum("ij,ij->i", drift, drift)
        curvature_term = np.einsum("j,ijj->i", eigenvalues**2, cov_t)
        score_term = np.sum(1.0 / cov_eigenvalues, axis=1)
        values[start : start + NODE_CHUNK] = (
            grad_term
            + curvature_term
            - 2 * beta_inv * trace_a
            + beta_inv**2 * score_term
        )
    return values


def entropy_dynamic_gaussian(
    pot: QuadraticPotential,
    init: GaussianMeasure,
    beta_inv: float,
    T: float,
    n_quad: int = DEFAULT_N_QUAD,
) -> EntropyEstimate:
    """Time integral of the Gaussian entropy production rate up to T (Simpson)."""
    if not beta_inv > 0:
        raise ValidationError(f"beta_inv: must be positive, got {beta_inv}")
    _check_same_dim(init.dim, pot.dim, "init")
    if not pot.is_positive_definite:
        raise NumericalError(
            f"A is singular (smallest eigenvalue {pot.lambda_min:.3g})"
        )
    if T == 0:
        return EntropyEstimate(0.0, EntropyMethod.DYNAMIC_GAUSSIAN, 0.0)
    nodes = refined_time_grid(T, n_quad)
    values = _gaussian_integrand(pot, init, beta_inv, nodes)
    value = simpson(values, nodes)
    logger.debug(f"gaussian entropy over [0, {T:.6g}] on {nodes.size} nodes: {value}")
    return EntropyEstimate(value, EntropyMethod.DYNAMIC_GAUSSIAN, float(T))


def entropy_equilibrium(
    lnZ_T: float, lnZ_0: float, mean_initial_loss: float, beta_inv: float
) -> EntropyEstimate:
    """Free-energy difference plus the mean initial loss."""
    if not beta_inv > 0:
        raise ValidationError(f"beta_inv: must be positive, got {beta_inv}")
    value = beta_inv * lnZ_T - beta_inv * lnZ_0 + mean_initial_loss
    return EntropyEstimate(value, EntropyMethod.EQUILIBRIUM, None)


def _gaussian_log_det(covariance: Matrix, name: str) -> float:
    sign, log_det = np.linalg.slogdet(covariance)
    if sign <= 0 or not math.isfinite(log_det):
        raise NumericalError(
            f"{name}: covariance is singular, log-determinant undefined"
        )
    return float(log_det)


def equilibrium_terms(
    pot: QuadraticPotential, init: GaussianMeasure, beta_inv: float
) -> EquilibriumTerms:
    """
    Free-energy terms for a switch from the Gibbs potential of init to V.

    init = N(mu0, S0) is the Gibbs measure at inverse temperature beta of
    V0 = beta_inv * (theta - mu0)^T S0^-1 (theta - mu0) / 2, so
    lnZ_0 = ln|2 pi S0| / 2, lnZ_T = ln|2 pi beta_inv A^-1| / 2 - beta min V and the
    mean initial loss is <V>_init - <V0>_init.
    """
    if not beta_inv > 0:
        raise ValidationError(f"beta_inv: must be positive, got {beta_inv}")
    _check_same_dim(init.dim, pot.dim, "init")
    if not pot.is_positive_definite:
        raise NumericalError(
            f"A is singular (smallest eigenvalue {pot.lambda_min:.3g}): "
            "the Gibbs measure is not normalizable"
        )
    d = pot.dim
    ln_z_init = 0.5 * (
        d * math.log(2 * math.pi) + _gaussian_log_det(init.covariance, "init")
    )
    eigenvalues, _ = pot.eigh()
    ln_z_final = 0.5 * (
        d * math.log(2 * math.pi * beta_inv) - spectral_sum(np.log(eigenvalues))
    ) - pot.minimum() / beta_inv
    mean_potential = float(pot.value(init.mean)) + 0.5 * float(
        np.sum(pot.A * init.covariance)
    )
    return EquilibriumTerms(
        ln_z_final=ln_z_final,
        ln_z_init=ln_z_init,
        mean_initial_loss=mean_potential - 0.5 * d * beta_inv,
    )


def relative_entropy_gaussian(p: GaussianMeasure, q: GaussianMeasure) -> float:
    """KL(p || q) for Gaussian measures with non-singular covariances."""
    _check_same_dim(p.dim, q.dim, "relative_entropy_gaussian")
    log_det_p = _gaussian_log_det(p.covariance, "p")
    log_det_q = _gaussian_log_det(q.covariance, "q")
    shift = q.mean - p.mean
    trace_term = float(np.trace(np.linalg.solve(q.covariance, p.covariance)))
    mahalanobis = float(shift @ np.linalg.solve(q.covariance, shift))
    return 0.5 * (trace_term + mahalanobis - p.dim + log_det_q - log_det_p)


def entropy_ntk(loss_initial: float, loss_final: float) -> EntropyEstimate:
    """Loss drop of a gradient-flow pair."""
    drop = loss_initial - loss_final
    if drop < -ENTROPY_ATOL:
        raise ValidationError(
            f"loss_final: {loss_final:.6g} exceeds loss_initial {loss_initial:.6g}, "
            "not a gradient-flow pair"
        )
    return EntropyEstimate(drop, EntropyMethod.NTK_LOSS_DROP, None)


def speed_limit(w2_sq: float, entropy: float) -> float:
    """T_SL = w2_sq / entropy, and 0 when nothing is transported."""
    return transport_time(w2_sq, entropy)


def inefficiency(T: float, t_sl: float) -> float:
    if not t_sl > 0:
        raise NumericalError(f"t_sl: inefficiency requires t_sl > 0, got {t_sl}")
    return T / t_sl
