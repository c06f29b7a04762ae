"""
Speed-limit reports for recorded trajectories.

Only checkpoints are available, so W2 is the squared L2 distance between the end
points, entropy production is the drop in loss, and the path length is the polygonal
chord sum, a lower bound on the length of the continuous path.
"""

import math
import re
from collections.abc import Sequence
from logging import getLogger

import numpy as np

from tslim.constants import FLAG_ENTROPY_ERROR, FLAG_SUB_UNITY
from tslim.core import SpeedLimitReport, Trajectory
from tslim.errors import ValidationError
from tslim.thermo import w2_dirac
from tslim.typedefs import Matrix, Triplet

logger = getLogger(__name__)

TRIPLET_PATTERN = re.compile(r"^\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*$")


def _chord_lengths(weights: Matrix) -> np.ndarray:
    return np.linalg.norm(np.diff(weights, axis=0), axis=1)


def segment_report(traj: Trajectory, end: int = -1) -> SpeedLimitReport:
    """Report between the first checkpoint of traj and checkpoint end."""
    last = end % traj.m
    weights = traj.weights[: last + 1]
    report = SpeedLimitReport.from_transport(
        horizon_t=float(traj.times[last] - traj.times[0]),
        w2_sq=w2_dirac(weights[0], weights[-1]),
        entropy=float(traj.losses[0] - traj.losses[last]),
        path_length=math.fsum(_chord_lengths(weights).tolist()),
        dirac=True,
    )
    _log_flags(report, traj.times[0], traj.times[last])
    return report


def _log_flags(report: SpeedLimitReport, start: float, end: float) -> None:
    if FLAG_ENTROPY_ERROR in report.flags:
        logger.warning(
            f"loss increased between t = {start:.6g} and t = {end:.6g}: "
            "no speed limit for this segment"
        )
    if FLAG_SUB_UNITY in report.flags:
        logger.warning(
            f"inefficiency {report.inefficiency:.6g} < 1 between t = {start:.6g} and "
            f"t = {end:.6g}: the recorded path is not a gradient flow"
        )


def analyze_trajectory(
    traj: Trajectory, warm_start_index: int | None = None
) -> tuple[SpeedLimitReport, SpeedLimitReport | None]:
    """Cold-start report from checkpoint 0 and optional warm-start report, both to
    the final checkpoint."""
    if traj.m < 2:
        raise ValidationError(
            f"trajectory: at least 2 checkpoints are required, got {traj.m}"
        )
    cold = segment_report(traj)
    warm = None
    if warm_start_index is not None:
        if not 0 <= warm_start_index < traj.m:
            raise ValidationError(
                f"warm_start_index: {warm_start_index} outside [0, {traj.m - 1}]"
            )
        warm = segment_report(traj.segment(warm_start_index))
    return cold, warm


def report_series(traj: Trajectory, origin: int = 0) -> list[SpeedLimitReport]:
    """One report per checkpoint after origin, each measured from origin."""
    segment = traj.segment(origin)
    return [segment_report(segment, end) for end in range(1, segment.m)]


def parse_triplets(text: str) -> list[Triplet]:
    """Parse "i,j,k;i,j,k;..." into index triplets."""
    triplets: list[Triplet] = []
    for part in text.split(";"):
        if not part.strip():
            continue
        match = TRIPLET_PATTERN.match(part)
        if match is None:
            raise ValidationError(
                f"triplets: {part.strip()!r} is not three comma separated indices"
            )
        i, j, k = (int(group) for group in match.groups())
        triplets.append((i, j, k))
    if not triplets:
        raise ValidationError(f"triplets: no triplet found in {text!r}")
    return triplets


def weight_triplet_trace(traj: Trajectory, indices: Sequence[int]) -> Matrix:
    """Columns (w_i, w_j, w_k) of the weights, one row per checkpoint."""
    if len(indices) != 3:
        raise ValidationError(
            f"indices: exactly 3 weight indices are required, got {len(indices)}"
        )
    for index in indices:
        if not 0 <= index < traj.dim:
            raise ValidationError(
                f"indices: weight index {index} outside [0, {traj.dim - 1}]"
            )
    return traj.weights[:, list(indices)]
