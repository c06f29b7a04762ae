"""
Domain types shared by all tslim modules.

All types are frozen dataclasses. Array fields are copied to float64 on construction
and made read-only, so a constructed value can be shared freely between threads and
never violates the invariants checked in its __post_init__.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike

from tslim.constants import (
    ENTROPY_ATOL,
    FLAG_ENTROPY_ERROR,
    FLAG_NO_BOUND,
    FLAG_SUB_UNITY,
    NORMALIZATION_BETA_INV,
    PSD_RTOL,
    SYMMETRY_RTOL,
)
from tslim.errors import NumericalError, ValidationError
from tslim.typedefs import Matrix, Vector

logger = getLogger(__name__)


def frozen_array(values: ArrayLike, name: str, ndim: int) -> np.ndarray:
    try:
        array = np.array(values, dtype=np.float64, copy=True)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{name}: not a numeric array ({e})") from e
    if array.ndim != ndim:
        raise ValidationError(
            f"{name}: expected {ndim} dimension(s), got shape {array.shape}"
        )
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name}: contains non-finite values")
    array.setflags(write=False)
    return array


def checked_covariance(covariance: ArrayLike, name: str = "covariance") -> Matrix:
    """Symmetrize a covariance matrix and verify that it is positive semidefinite."""
    cov = frozen_array(covariance, name, ndim=2)
    if cov.shape[0] != cov.shape[1]:
        raise ValidationError(f"{name}: must be square, got shape {cov.shape}")
    scale = float(np.max(np.abs(cov))) if cov.size else 0.0
    asymmetry = float(np.max(np.abs(cov - cov.T))) if cov.size else 0.0
    if asymmetry > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValidationError(f"{name}: not symmetric, max |C - C^T| = {asymmetry:.3g}")
    sym = 0.5 * (cov + cov.T)
    if sym.size:
        eigenvalues = np.linalg.eigvalsh(sym)
        largest = max(float(eigenvalues[-1]), 0.0)
        if eigenvalues[0] < -PSD_RTOL * largest:
            raise ValidationError(
                f"{name}: not positive semidefinite, eigenvalue {eigenvalues[0]:.6g}"
            )
    sym.setflags(write=False)
    return sym


@dataclass(frozen=True, eq=False)
class SpectralModel:
    """NTK eigenvalues and squared initial residues, one pair per mode."""

    eigenvalues: Vector
    residues_sq: Vector

    def __post_init__(self) -> None:
        eigenvalues = frozen_array(self.eigenvalues, "eigenvalues", ndim=1)
        residues_sq = frozen_array(self.residues_sq, "residues_sq", ndim=1)
        if eigenvalues.size == 0:
            raise ValidationError("eigenvalues: at least one mode is required")
        if residues_sq.shape != eigenvalues.shape:
            raise ValidationError(
                f"residues_sq: length {residues_sq.size} differs from "
                f"eigenvalues length {eigenvalues.size}"
            )
        if np.any(eigenvalues <= 0):
            raise ValidationError(
                f"eigenvalues: must be positive, found {eigenvalues.min():.6g}"
            )
        if np.any(np.diff(eigenvalues) > 0):
            raise ValidationError("eigenvalues: must be sorted non-increasing")
        if np.any(residues_sq < 0):
            raise ValidationError(
                f"residues_sq: must be non-negative, found {residues_sq.min():.6g}"
            )
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "residues_sq", residues_sq)

    @property
    def n(self) -> int:
        return int(self.eigenvalues.size)


@dataclass(frozen=True)
class PowerLawSpec:
    scale: float = 1.0  # eigenvalue scale
    alpha: float = 1.0  # eigenvalue decay exponent
    residue_scale: float = 1.0
    delta: float = 0.0  # residue decay exponent
    k_star: int = 1  # first mode index
    n: int = 1  # last mode index

    def __post_init__(self) -> None:
        if not self.scale > 0:
            raise ValidationError(f"scale: must be positive, got {self.scale}")
        if not self.residue_scale >= 0:
            raise ValidationError(
                f"residue_scale: must be non-negative, got {self.residue_scale}"
            )
        if not self.alpha > 0:
            raise ValidationError(f"alpha: must be positive, got {self.alpha}")
        if not self.delta >= 0:
            raise ValidationError(f"delta: must be non-negative, got {self.delta}")
        if not 1 <= self.k_star <= self.n:
            raise ValidationError(
                f"k_star: must satisfy 1 <= k_star <= n, got k_star={self.k_star}, "
                f"n={self.n}"
            )


def build_power_law_spectrum(spec: PowerLawSpec) -> SpectralModel:
    k = np.arange(spec.k_star, spec.n + 1, dtype=np.float64)
    return SpectralModel(
        eigenvalues=spec.scale * k ** (-spec.alpha),
        residues_sq=spec.residue_scale * k ** (-spec.delta),
    )


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: Vector
    covariance: Matrix

    def __post_init__(self) -> None:
        mean = frozen_array(self.mean, "mean", ndim=1)
        covariance = checked_covariance(self.covariance)
        if covariance.shape != (mean.size, mean.size):
            raise ValidationError(
                f"covariance: shape {covariance.shape} does not match mean dimension "
                f"{mean.size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", covariance)

    @property
    def dim(self) -> int:
        return int(self.mean.size)

    @classmethod
    def dirac(cls, mean: ArrayLike) -> "GaussianMeasure":
        mean_array = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        return cls(mean_array, np.zeros((mean_array.size, mean_array.size)))

    @property
    def is_degenerate(self) -> bool:
        """True for a singular covariance, e.g. a Dirac measure."""
        eigenvalues = np.linalg.eigvalsh(self.covariance)
        return bool(eigenvalues[0] <= PSD_RTOL * max(eigenvalues[-1], 0.0))

    def scaled(self, s: float) -> "GaussianMeasure":
        """Same mean, covariance multiplied by s."""
        return GaussianMeasure(self.mean, s * self.covariance)


def validate_gaussian(mean: ArrayLike, covariance: ArrayLike) -> GaussianMeasure:
    """
    Build a GaussianMeasure from raw arrays: the covariance is symmetrized to
    (C + C^T)/2 and rejected when an eigenvalue is below -1e-12 times the largest.
    """
    return GaussianMeasure(
        frozen_array(mean, "mean", ndim=1), checked_covariance(covariance)
    )


@dataclass(frozen=True, eq=False)
class QuadraticPotential:
    """V(theta) = 1/2 theta^T A theta - b^T theta + c with A symmetric PSD."""

    A: Matrix
    b: Vector
    c: float = 0.0

    def __post_init__(self) -> None:
        A = checked_covariance(self.A, name="A")
        b = frozen_array(self.b, "b", ndim=1)
        if A.shape != (b.size, b.size):
            raise ValidationError(
                f"b: dimension {b.size} does not match A of shape {A.shape}"
            )
        if not math.isfinite(self.c):
            raise ValidationError(f"c: must be finite, got {self.c}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    @property
    def dim(self) -> int:
        return int(self.b.size)

    @cached_property
    def spectrum(self) -> tuple[Vector, Matrix]:
        """Eigenvalues (ascending, clamped at 0) and orthonormal eigenvectors of A."""
        eigenvalues, eigenvectors = np.linalg.eigh(self.A)
        return np.maximum(eigenvalues, 0.0), eigenvectors

    def eigh(self) -> tuple[Vector, Matrix]:
        return self.spectrum

    @property
    def lambda_max(self) -> float:
        return float(self.spectrum[0][-1])

    @property
    def lambda_min(self) -> float:
        return float(self.spectrum[0][0])

    @property
    def is_positive_definite(self) -> bool:
        return self.lambda_min > PSD_RTOL * max(self.lambda_max, 1.0)

    def value(self, theta: ArrayLike) -> float | np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return self.loss(theta) + self.c

    def loss(self, theta: ArrayLike) -> float | np.ndarray:
        """V(theta) - c; works on a single point or on a batch in the last axis."""
        theta = np.asarray(theta, dtype=np.float64)
        quad = 0.5 * np.einsum("...i,ij,...j->...", theta, self.A, theta)
        return quad - theta @ self.b

    def gradient(self, theta: ArrayLike) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return theta @ self.A - self.b

    def minimizer(self) -> Vector:
        if not self.is_positive_definite:
            raise NumericalError(
                f"A is singular (smallest eigenvalue {self.lambda_min:.3g}), "
                "the minimizer is not unique"
            )
        eigenvalues, eigenvectors = self.spectrum
        return eigenvectors @ ((eigenvectors.T @ self.b) / eigenvalues)

    def minimum(self) -> float:
        return float(self.value(self.minimizer()))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Time ordered checkpoints of a training run.

    grad_sq holds |grad V|^2 at the checkpoints. Runs produced by the dynamics module
    also carry fine_times and fine_grad_sq at full step resolution, which the entropy
    integrals use.
    """

    times: Vector
    weights: Matrix
    losses: Vector
    grad_sq: Vector | None = None
    fine_times: Vector | None = None
    fine_grad_sq: Vector | None = None

    def __post_init__(self) -> None:
        times = frozen_array(self.times, "times", ndim=1)
        weights = frozen_array(self.weights, "weights", ndim=2)
        losses = frozen_array(self.losses, "losses", ndim=1)
        m = times.size
        if m == 0:
            raise ValidationError("times: at least one checkpoint is required")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("times: must be strictly increasing")
        if weights.shape[0] != m or losses.size != m:
            raise ValidationError(
                f"weights/losses: expected {m} checkpoints, got {weights.shape[0]} "
                f"weights and {losses.size} losses"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "losses", losses)
        if self.grad_sq is not None:
            grad_sq = frozen_array(self.grad_sq, "grad_sq", ndim=1)
            if grad_sq.size != m:
                raise ValidationError(
                    f"grad_sq: expected {m} values, got {grad_sq.size}"
                )
            if np.any(grad_sq < 0):
                raise ValidationError("grad_sq: must be non-negative")
            object.__setattr__(self, "grad_sq", grad_sq)
        if (self.fine_times is None) != (self.fine_grad_sq is None):
            raise ValidationError("fine_times and fine_grad_sq must be given together")
        if self.fine_times is not None and self.fine_grad_sq is not None:
            fine_times = frozen_array(self.fine_times, "fine_times", ndim=1)
            fine_grad_sq = frozen_array(self.fine_grad_sq, "fine_grad_sq", ndim=1)
            if fine_times.size != fine_grad_sq.size:
                raise ValidationError(
                    f"fine_grad_sq: expected {fine_times.size} values, "
                    f"got {fine_grad_sq.size}"
                )
            if np.any(np.diff(fine_times) <= 0):
                raise ValidationError("fine_times: must be strictly increasing")
            if np.any(fine_grad_sq < 0):
                raise ValidationError("fine_grad_sq: must be non-negative")
            object.__setattr__(self, "fine_times", fine_times)
            object.__setattr__(self, "fine_grad_sq", fine_grad_sq)

    @property
    def m(self) -> int:
        return int(self.times.size)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])

    def segment(self, start: int) -> "Trajectory":
        """Checkpoints from index start onwards."""
        if not 0 <= start < self.m:
            raise ValidationError(f"start: index {start} outside [0, {self.m - 1}]")
        fine_times = fine_grad_sq = None
        if self.fine_times is not None and self.fine_grad_sq is not None:
            keep = self.fine_times >= self.times[start]
            fine_times = self.fine_times[keep]
            fine_grad_sq = self.fine_grad_sq[keep]
        return Trajectory(
            times=self.times[start:],
            weights=self.weights[start:],
            losses=self.losses[start:],
            grad_sq=None if self.grad_sq is None else self.grad_sq[start:],
            fine_times=fine_times,
            fine_grad_sq=fine_grad_sq,
        )


@dataclass(frozen=True)
class SpeedLimitReport:
    """
    Result record of a speed-limit evaluation. Undefined quantities are None, e.g.
    the horizon of a stationary (T -> infinity) comparison or T_SL when the loss did
    not decrease.
    """

    horizon_t: float | None
    w2_sq: float
    entropy: float | None
    t_sl: float | None
    inefficiency: float | None = None
    path_length: float | None = None
    geo_length: float | None = None
    length_ratio: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)
    entropy_normalization: str = NORMALIZATION_BETA_INV

    def __post_init__(self) -> None:
        if not self.w2_sq >= 0:
            raise ValidationError(f"w2_sq: must be non-negative, got {self.w2_sq}")
        if self.entropy is not None and self.entropy < -ENTROPY_ATOL:
            if self.t_sl is not None:
                raise ValidationError(
                    f"t_sl: defined although entropy {self.entropy:.6g} is negative"
                )
        if self.entropy is not None and self.entropy > 0 and self.t_sl is not None:
            expected = self.w2_sq / self.entropy
            if not math.isclose(self.t_sl, expected, rel_tol=1e-12, abs_tol=0.0):
                raise ValidationError(
                    f"t_sl: {self.t_sl} differs from w2_sq / entropy = {expected}"
                )

    @classmethod
    def from_transport(
        cls,
        horizon_t: float | None,
        w2_sq: float,
        entropy: float | None,
        path_length: float | None = None,
        geo_length: float | None = None,
        *,
        dirac: bool = False,
        flags: tuple[str, ...] = (),
        entropy_normalization: str = NORMALIZATION_BETA_INV,
    ) -> "SpeedLimitReport":
        """
        Assemble a report from a transport cost and an entropy value.

        A negative entropy (beyond round-off) leaves T_SL undefined and sets the
        entropy_error flag; zero entropy with positive transport sets
        no_admissible_bound. With dirac=True the geodesic length defaults to
        sqrt(w2_sq).
        """
        report_flags = list(flags)
        t_sl: float | None = None
        if entropy is not None:
            if entropy < -ENTROPY_ATOL:
                report_flags.append(FLAG_ENTROPY_ERROR)
            elif entropy <= 0 and w2_sq > 0:
                report_flags.append(FLAG_NO_BOUND)
            else:
                t_sl = transport_time(w2_sq, entropy)
        efficiency_ratio: float | None = None
        if horizon_t is not None and t_sl is not None and t_sl > 0:
            efficiency_ratio = horizon_t / t_sl
            if efficiency_ratio < 1:
                report_flags.append(FLAG_SUB_UNITY)
        if dirac and geo_length is None:
            geo_length = math.sqrt(w2_sq)
        length_ratio: float | None = None
        if path_length is not None and geo_length is not None and geo_length > 0:
            length_ratio = path_length / geo_length
        return cls(
            horizon_t=horizon_t,
            w2_sq=float(w2_sq),
            entropy=None if entropy is None else float(entropy),
            t_sl=t_sl,
            inefficiency=efficiency_ratio,
            path_length=path_length,
            geo_length=geo_length,
            length_ratio=length_ratio,
            flags=tuple(dict.fromkeys(report_flags)),
            entropy_normalization=entropy_normalization,
        )


def transport_time(w2_sq: float, entropy: float) -> float:
    """W2 / entropy, with the convention that no transport takes no time."""
    if not w2_sq >= 0:
        raise ValidationError(f"w2_sq: must be non-negative, got {w2_sq}")
    if w2_sq == 0:
        return 0.0
    if not entropy > 0:
        raise NumericalError(
            f"no admissible bound: entropy {entropy:.6g} <= 0 with w2_sq {w2_sq:.6g}"
        )
    return w2_sq / entropy
