import json

import numpy as np
import pytest

from tslim.archive import TrajectoryArchive, ingest_trajectory, write_trajectory_archive
from tslim.constants import ARCHIVE_MAGIC
from tslim.errors import ArchiveError


@pytest.fixture
def archive(tmp_path, three_checkpoints) -> TrajectoryArchive:
    write_trajectory_archive(three_checkpoints, tmp_path / "run", warm_start_index=1)
    return TrajectoryArchive(tmp_path / "run")


class TestRoundTrip:
    def test_written_archive_is_read_back(self, archive, three_checkpoints):
        traj = ingest_trajectory(archive.path)
        np.testing.assert_array_equal(traj.times, three_checkpoints.times)
        np.testing.assert_array_equal(traj.weights, three_checkpoints.weights)
        np.testing.assert_array_equal(traj.losses, three_checkpoints.losses)
        assert traj.grad_sq is None

    def test_rewrite_is_byte_identical(self, archive, tmp_path):
        copy = write_trajectory_archive(
            ingest_trajectory(archive.path), tmp_path / "copy", warm_start_index=1
        )
        for name in ("manifest.json", "metrics.csv", "weights.bin"):
            assert (copy / name).read_bytes() == (archive.path / name).read_bytes()

    def test_manifest(self, archive):
        manifest = archive.read_manifest()
        assert manifest["dimension"] == 2
        assert manifest["checkpoints"] == 3
        assert manifest["warm_start_index"] == 1

    def test_weights_layout(self, archive):
        data = archive.weights_path.read_bytes()
        assert data.startswith(ARCHIVE_MAGIC)
        assert len(data) == len(ARCHIVE_MAGIC) + 3 * 2 * 8
        assert np.frombuffer(data[len(ARCHIVE_MAGIC) :], dtype="<f8")[3] == 0.0

    def test_epochs_are_scaled_by_learning_rate(self, archive):
        manifest = archive.read_manifest()
        manifest["learning_rate"] = 0.5
        archive.manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
        archive.metrics_path.write_text(
            "epoch,loss\n0,2\n2,1\n4,0.5\n", encoding="utf-8"
        )
        traj = ingest_trajectory(archive.path)
        np.testing.assert_allclose(traj.times, [0.0, 1.0, 2.0])


class TestMalformedArchives:
    def test_missing_directory(self, tmp_path):
        with pytest.raises(ArchiveError, match="not an archive directory"):
            ingest_trajectory(tmp_path / "missing")

    def test_bad_magic(self, archive):
        data = archive.weights_path.read_bytes()
        archive.weights_path.write_bytes(b"XXXXXXXX" + data[8:])
        with pytest.raises(ArchiveError, match="byte 0: expected magic"):
            archive.read()

    def test_truncated_weights(self, archive):
        data = archive.weights_path.read_bytes()
        archive.weights_path.write_bytes(data[:-8])
        with pytest.raises(ArchiveError, match="expected 56 bytes .* got 48"):
            archive.read()

    def test_invalid_json_reports_byte_offset(self, archive):
        archive.manifest_path.write_text('{"format"1}', encoding="utf-8")
        with pytest.raises(ArchiveError, match="manifest.json: byte 9"):
            archive.read()

    def test_schema_violation(self, archive):
        manifest = archive.read_manifest()
        manifest["dimension"] = 0
        manifest["extra"] = True
        archive.manifest_path.write_text(json.dumps(manifest), encoding="utf-8")
        with pytest.raises(ArchiveError, match="dimension: 0 is less than"):
            archive.read()

    def test_unknown_header(self, archive):
        archive.metrics_path.write_text("step,loss\n0,1\n", encoding="utf-8")
        with pytest.raises(ArchiveError, match="byte 0: expected header"):
            archive.read()

    def test_unparsable_row(self, archive):
        archive.metrics_path.write_text(
            "time,loss\n0,2\n1,abc\n2,0.5\n", encoding="utf-8"
        )
        with pytest.raises(ArchiveError, match="byte 14: cannot parse row '1,abc'"):
            archive.read()

    def test_row_count(self, archive):
        archive.metrics_path.write_text("time,loss\n0,2\n1,1\n", encoding="utf-8")
        with pytest.raises(ArchiveError, match="expected 3 rows, got 2"):
            archive.read()

    def test_epochs_need_learning_rate(self, archive):
        archive.metrics_path.write_text(
            "epoch,loss\n0,2\n1,1\n2,0.5\n", encoding="utf-8"
        )
        with pytest.raises(ArchiveError, match="learning_rate is required"):
            archive.read()

    def test_times_must_increase(self, archive):
        archive.metrics_path.write_text(
            "time,loss\n0,2\n2,1\n1,0.5\n", encoding="utf-8"
        )
        with pytest.raises(ArchiveError, match="strictly increasing"):
            archive.read()
