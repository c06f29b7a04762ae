"""
Trajectory archives: a directory holding manifest.json, metrics.csv and weights.bin.

metrics.csv has the header time,loss or epoch,loss and one row per checkpoint. Epoch
rows are converted to continuum time with the learning rate of the manifest.
weights.bin is the magic TSLW0001 followed by m x d little-endian float64 values in
row-major order.
"""

import json
from logging import getLogger
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from tslim.constants import (
    ARCHIVE_FORMAT,
    ARCHIVE_MAGIC,
    ARCHIVE_VERSION,
    DEFAULT_TIME_UNIT,
    MANIFEST_FILE,
    METRICS_FILE,
    WEIGHTS_FILE,
)
from tslim.core import Trajectory
from tslim.errors import ArchiveError, ValidationError, schema_message
from tslim.typedefs import Matrix, Vector

logger = getLogger(__name__)

TIME_HEADER = "time,loss"
EPOCH_HEADER = "epoch,loss"
FLOAT_BYTES = 8


class TrajectoryArchive:
    MANIFEST_SCHEMA: dict[str, Any] = {
        "type": "object",
        "properties": {
            "format": {"const": ARCHIVE_FORMAT},
            "version": {"const": ARCHIVE_VERSION},
            "dimension": {"type": "integer", "minimum": 1},
            "checkpoints": {"type": "integer", "minimum": 1},
            "time_unit": {"type": "string"},
            "learning_rate": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "warm_start_index": {"type": ["integer", "null"], "minimum": 0},
        },
        "required": ["format", "version", "dimension", "checkpoints"],
        "additionalProperties": False,
    }

    def __init__(self, path: Path | str):
        self.path = Path(path)

    @property
    def manifest_path(self) -> Path:
        return self.path / MANIFEST_FILE

    @property
    def metrics_path(self) -> Path:
        return self.path / METRICS_FILE

    @property
    def weights_path(self) -> Path:
        return self.path / WEIGHTS_FILE

    def read_manifest(self) -> dict[str, Any]:
        text = self.manifest_path.read_bytes()
        try:
            manifest = json.loads(text)
        except UnicodeDecodeError as e:
            raise ArchiveError(f"{MANIFEST_FILE}: byte {e.start}: not UTF-8") from e
        except json.JSONDecodeError as e:
            offset = len(e.doc[: e.pos].encode("utf-8"))
            raise ArchiveError(f"{MANIFEST_FILE}: byte {offset}: {e.msg}") from e
        errors = sorted(
            jsonschema.Draft202012Validator(self.MANIFEST_SCHEMA).iter_errors(manifest),
            key=lambda error: list(error.path),
        )
        if errors:
            messages = "; ".join(schema_message(error) for error in errors)
            raise ArchiveError(f"{MANIFEST_FILE}: {messages}")
        return manifest

    def read_metrics(self, manifest: dict[str, Any]) -> tuple[Vector, Vector]:
        """Times and losses from metrics.csv, with epochs converted to time."""
        data = self.metrics_path.read_bytes()
        try:
            data.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ArchiveError(f"{METRICS_FILE}: byte {e.start}: not UTF-8") from e
        lines = data.split(b"\n")
        header = lines[0].decode("utf-8").strip()
        if header not in (TIME_HEADER, EPOCH_HEADER):
            raise ArchiveError(
                f"{METRICS_FILE}: byte 0: expected header {TIME_HEADER!r} or "
                f"{EPOCH_HEADER!r}, got {header!r}"
            )
        offset = len(lines[0]) + 1
        rows: list[tuple[float, float]] = []
        for index, raw in enumerate(lines[1:], start=1):
            line = raw.decode("utf-8").strip()
            if not line:
                if any(rest.strip() for rest in lines[index + 1 :]):
                    raise ArchiveError(f"{METRICS_FILE}: byte {offset}: empty row")
                break
            fields = line.split(",")
            try:
                if len(fields) != 2:
                    raise ValueError(f"expected 2 fields, got {len(fields)}")
                rows.append((float(fields[0]), float(fields[1])))
            except ValueError as e:
                raise ArchiveError(
                    f"{METRICS_FILE}: byte {offset}: cannot parse row {line!r} ({e})"
                ) from e
            offset += len(raw) + 1
        if len(rows) != manifest["checkpoints"]:
            raise ArchiveError(
                f"{METRICS_FILE}: expected {manifest['checkpoints']} rows, "
                f"got {len(rows)}"
            )
        times = np.array([row[0] for row in rows])
        losses = np.array([row[1] for row in rows])
        if header == EPOCH_HEADER:
            learning_rate = manifest.get("learning_rate")
            if learning_rate is None:
                raise ArchiveError(
                    f"{MANIFEST_FILE}: learning_rate is required for an epoch column"
                )
            times = times * learning_rate
        return times, losses

    def read_weights(self, manifest: dict[str, Any]) -> Matrix:
        data = self.weights_path.read_bytes()
        if data[: len(ARCHIVE_MAGIC)] != ARCHIVE_MAGIC:
            raise ArchiveError(
                f"{WEIGHTS_FILE}: byte 0: expected magic {ARCHIVE_MAGIC!r}, "
                f"got {data[: len(ARCHIVE_MAGIC)]!r}"
            )
        m, d = manifest["checkpoints"], manifest["dimension"]
        expected = len(ARCHIVE_MAGIC) + m * d * FLOAT_BYTES
        if len(data) != expected:
            raise ArchiveError(
                f"{WEIGHTS_FILE}: expected {expected} bytes for {m} x {d} float64 "
                f"values, got {len(data)}"
            )
        weights = np.frombuffer(data, dtype="<f8", offset=len(ARCHIVE_MAGIC))
        return weights.reshape(m, d).astype(np.float64)

    def read(self) -> Trajectory:
        if not self.path.is_dir():
            raise ArchiveError(f"{self.path}: not an archive directory")
        manifest = self.read_manifest()
        times, losses = self.read_metrics(manifest)
        weights = self.read_weights(manifest)
        try:
            return Trajectory(times=times, weights=weights, losses=losses)
        except ValidationError as e:
            raise ArchiveError(f"{self.path}: {e}") from e

    def write(
        self,
        traj: Trajectory,
        *,
        learning_rate: float | None = None,
        warm_start_index: int | None = None,
        time_unit: str = DEFAULT_TIME_UNIT,
    ) -> Path:
        self.path.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format": ARCHIVE_FORMAT,
            "version": ARCHIVE_VERSION,
            "dimension": traj.dim,
            "checkpoints": traj.m,
            "time_unit": time_unit,
            "learning_rate": learning_rate,
            "warm_start_index": warm_start_index,
        }
        jsonschema.validate(manifest, self.MANIFEST_SCHEMA)
        with open(self.manifest_path, "w", encoding="utf-8") as f:
            f.write(json.dumps(manifest, indent=4, sort_keys=True) + "\n")
        with open(self.metrics_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(TIME_HEADER + "\n")
            for t, loss in zip(traj.times, traj.losses, strict=True):
                f.write(f"{float(t)!r},{float(loss)!r}\n")
        with open(self.weights_path, "wb") as f:
            f.write(ARCHIVE_MAGIC)
            f.write(np.ascontiguousarray(traj.weights, dtype="<f8").tobytes())
        logger.info(f"Trajectory archive written to {self.path}")
        return self.path


def write_trajectory_archive(
    traj: Trajectory,
    path: Path | str,
    *,
    learning_rate: float | None = None,
    warm_start_index: int | None = None,
    time_unit: str = DEFAULT_TIME_UNIT,
) -> Path:
    return TrajectoryArchive(path).write(
        traj,
        learning_rate=learning_rate,
        warm_start_index=warm_start_index,
        time_unit=time_unit,
    )


def ingest_trajectory(path: Path | str) -> Trajectory:
    """Read an archive; ingested trajectories carry no gradient norms."""
    return TrajectoryArchive(path).read()
