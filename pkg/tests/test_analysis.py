import logging
import math

import numpy as np
import pytest

from tslim.analysis import (
    analyze_trajectory,
    parse_triplets,
    report_series,
    weight_triplet_trace,
)
from tslim.constants import FLAG_ENTROPY_ERROR, FLAG_SUB_UNITY
from tslim.core import Trajectory
from tslim.errors import ValidationError


class TestAnalyzeTrajectory:
    def test_cold_start(self, three_checkpoints):
        cold, warm = analyze_trajectory(three_checkpoints)
        assert warm is None
        assert cold.horizon_t == 2.0
        assert cold.w2_sq == pytest.approx(2.0)
        assert cold.entropy == pytest.approx(1.5)
        assert cold.t_sl == pytest.approx(4.0 / 3.0)
        assert cold.inefficiency == pytest.approx(1.5)
        assert cold.path_length == pytest.approx(2.0)
        assert cold.geo_length == pytest.approx(math.sqrt(2.0))
        assert cold.length_ratio == pytest.approx(math.sqrt(2.0))
        assert cold.flags == ()

    def test_warm_start(self, three_checkpoints, caplog):
        with caplog.at_level(logging.WARNING):
            _, warm = analyze_trajectory(three_checkpoints, warm_start_index=1)
        assert warm.horizon_t == 1.0
        assert warm.w2_sq == pytest.approx(1.0)
        assert warm.entropy == pytest.approx(0.5)
        assert warm.t_sl == pytest.approx(2.0)
        assert warm.inefficiency == pytest.approx(0.5)
        assert FLAG_SUB_UNITY in warm.flags
        assert "not a gradient flow" in caplog.text

    def test_warm_start_out_of_range(self, three_checkpoints):
        with pytest.raises(ValidationError, match="warm_start_index: 3"):
            analyze_trajectory(three_checkpoints, warm_start_index=3)

    def test_single_checkpoint(self):
        traj = Trajectory(np.array([0.0]), np.zeros((1, 2)), np.array([1.0]))
        with pytest.raises(ValidationError, match="at least 2 checkpoints"):
            analyze_trajectory(traj)

    def test_loss_increase_is_flagged(self, caplog):
        traj = Trajectory(
            np.array([0.0, 1.0]), np.array([[0.0], [1.0]]), np.array([1.0, 2.0])
        )
        with caplog.at_level(logging.WARNING):
            cold, _ = analyze_trajectory(traj)
        assert cold.t_sl is None
        assert FLAG_ENTROPY_ERROR in cold.flags
        assert "loss increased" in caplog.text


class TestReportSeries:
    def test_one_report_per_checkpoint(self, three_checkpoints):
        reports = report_series(three_checkpoints)
        assert [r.horizon_t for r in reports] == [1.0, 2.0]
        assert reports[0].w2_sq == pytest.approx(1.0)
        assert reports[0].entropy == pytest.approx(1.0)
        assert reports[1].t_sl == pytest.approx(4.0 / 3.0)

    def test_series_from_origin(self, three_checkpoints):
        reports = report_series(three_checkpoints, origin=1)
        assert len(reports) == 1
        assert reports[0].t_sl == pytest.approx(2.0)


class TestTriplets:
    def test_parse(self):
        assert parse_triplets("0,1,2; 3 ,4,5;") == [(0, 1, 2), (3, 4, 5)]

    @pytest.mark.parametrize("text", ["0,1", "a,b,c", "0,1,2,3", "-1,0,1"])
    def test_malformed(self, text):
        with pytest.raises(ValidationError, match="not three comma separated"):
            parse_triplets(text)

    def test_empty(self):
        with pytest.raises(ValidationError, match="no triplet found"):
            parse_triplets(" ; ")

    def test_trace(self, three_checkpoints):
        trace = weight_triplet_trace(three_checkpoints, (1, 0, 1))
        np.testing.assert_array_equal(trace, [[0, 0, 0], [0, 1, 0], [1, 1, 1]])

    def test_trace_index_out_of_range(self, three_checkpoints):
        with pytest.raises(ValidationError, match="weight index 2 outside"):
            weight_triplet_trace(three_checkpoints, (0, 1, 2))
