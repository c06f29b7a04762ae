"""
Time grids, Simpson quadrature, Gauss-Legendre nodes and exactly rounded sums shared
by the thermo, ntk and linreg modules.
"""

import math
from collections.abc import Callable, Iterable
from functools import lru_cache
from logging import getLogger

import numpy as np
from numpy.typing import ArrayLike
from scipy import integrate, special

from tslim.constants import (
    DEFAULT_N_LOG,
    DEFAULT_N_QUAD,
    LOG_DECADES,
    SPEED_CHUNK,
)
from tslim.errors import NumericalError, ValidationError
from tslim.typedefs import Vector

logger = getLogger(__name__)


def refined_time_grid(
    T: float, n_quad: int = DEFAULT_N_QUAD, n_log: int = DEFAULT_N_LOG
) -> Vector:
    """
    Nodes on [0, T]: 0, then n_log log-spaced nodes covering LOG_DECADES decades below
    T/10, then 2 * n_quad uniform intervals on [T/10, T].
    """
    if not T >= 0:
        raise ValidationError(f"T: must be non-negative, got {T}")
    if n_quad < 1 or n_log < 1:
        raise ValidationError(
            f"n_quad, n_log: must be positive, got n_quad={n_quad}, n_log={n_log}"
        )
    if T == 0:
        return np.zeros(1)
    t_switch = T / 10
    log_nodes = np.geomspace(
        t_switch * 10.0**-LOG_DECADES, t_switch, n_log, endpoint=False
    )
    uniform = np.linspace(t_switch, T, 2 * n_quad + 1)
    return np.concatenate(([0.0], log_nodes, uniform))


def simpson(values: ArrayLike, nodes: ArrayLike) -> float:
    """Composite Simpson rule on a possibly non-uniform grid."""
    values = np.asarray(values, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.float64)
    if nodes.size < 2:
        return 0.0
    if not np.all(np.isfinite(values)):
        bad = int(np.argmin(np.isfinite(values)))
        raise NumericalError(
            f"integrand is not finite at t = {nodes[bad]:.6g} (node {bad})"
        )
    return float(integrate.simpson(values, x=nodes))


def cumulative(values: ArrayLike, nodes: ArrayLike) -> Vector:
    """Running Simpson integral, starting at 0 on the first node."""
    values = np.asarray(values, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NumericalError("integrand is not finite on the cumulative grid")
    if nodes.size < 3:
        return np.concatenate(
            ([0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(nodes)))
        )
    return integrate.cumulative_simpson(values, x=nodes, initial=0.0)


@lru_cache(maxsize=8)
def legendre_nodes(n: int) -> tuple[Vector, Vector]:
    """Gauss-Legendre nodes and weights on [-1, 1], read-only."""
    if n < 1:
        raise ValidationError(f"n: must be positive, got {n}")
    nodes, weights = special.roots_legendre(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def spectral_sum(terms: ArrayLike | Iterable[float]) -> float:
    return math.fsum(np.asarray(terms, dtype=np.float64).ravel().tolist())


def chunked_mode_sum(
    times: ArrayLike,
    term: Callable[[np.ndarray], np.ndarray],
    chunk: int = SPEED_CHUNK,
) -> Vector:
    """
    Evaluate sum_k term(t)_k for many times.

    term receives a column of times with shape (c, 1) and returns a (c, n) block of
    per-mode terms. Blocks are summed with numpy pairwise summation, so the result
    does not depend on how the times are chunked.
    """
    times = np.asarray(times, dtype=np.float64)
    sums = np.empty(times.size)
    for start in range(0, times.size, chunk):
        block = term(times[start : start + chunk, None])
        sums[start : start + chunk] = block.sum(axis=1)
    return sums
