import math

import numpy as np
import pandas as pd
import pytest

from src.analysis.metrics import (
    MetricsRow, base_joint_distances, format_summary, rows_frame, smooth, summarize, trace_states,
)
from src.models import RobotState
from src.storage.records import CsvAppender


def _row(method="agent", task=1, run=0, success=True, total=10.0, base=1.0, joint=0.5, planning=0.0) -> MetricsRow:
    return MetricsRow(method=method, task=task, run=run, seed=0, success=success,
                      outcome="hold_success" if success else "collision", total_time=total,
                      planning_time=planning, execution_time=total - planning, base_distance=base,
                      joint_distance=joint)


@pytest.fixture
def five_runs() -> list[MetricsRow]:
    rows = [_row(run=i, total=10.0 * (i + 1), base=float(i + 1)) for i in range(4)]
    rows.append(_row(run=4, success=False, total=99.0, base=50.0))
    return rows


class TestSummarize:
    def test_success_rate_over_all_runs(self):
        rows = [_row(run=0), _row(run=1), _row(run=2, success=False)]
        s = summarize(rows)
        assert s.iloc[0]["success_rate"] == pytest.approx(2 / 3)
        assert s.iloc[0]["n_runs"] == 3

    def test_single_row_has_zero_std(self):
        s = summarize([_row(total=12.0)])
        assert s.iloc[0]["total_time_std"] == 0.0
        assert s.iloc[0]["total_time_mean"] == 12.0

    def test_times_over_successes_only(self, five_runs):
        r = summarize(five_runs).iloc[0]
        assert r["success_rate"] == pytest.approx(0.8)
        assert r["total_time_mean"] == pytest.approx(25.0)
        assert r["total_time_std"] == pytest.approx(math.sqrt(125.0))
        assert r["base_distance_mean"] == pytest.approx(2.5)
        assert r["base_distance_std"] == pytest.approx(math.sqrt(1.25))

    def test_per_task_and_all_rows(self):
        rows = [_row(task=1, total=10.0), _row(task=2, total=30.0), _row(method="baseline", task=1, planning=2.0)]
        s = summarize(rows)
        assert list(zip(s["method"], s["task"])) == [
            ("agent", "1"), ("agent", "2"), ("agent", "all"), ("baseline", "1"), ("baseline", "all")]
        assert s.set_index(["method", "task"]).loc[("agent", "all"), "total_time_mean"] == pytest.approx(20.0)

    def test_no_successes(self):
        r = summarize([_row(success=False), _row(run=1, success=False)]).iloc[0]
        assert r["success_rate"] == 0.0
        assert math.isnan(r["total_time_mean"])

    def test_empty(self):
        with pytest.raises(ValueError):
            summarize([])

    def test_negative_metric_rejected(self):
        with pytest.raises(ValueError):
            _row(base=-1.0)

    def test_from_csv(self, five_runs, tmp_path):
        appender = CsvAppender(tmp_path / "runs.csv", MetricsRow.columns())
        appender.extend(r.to_dict() for r in five_runs)
        df = appender.read()
        assert list(df.columns) == MetricsRow.columns()
        pd.testing.assert_frame_equal(summarize(df), summarize(five_runs), check_dtype=False)

    def test_format(self, five_runs):
        text = format_summary(summarize(five_runs))
        assert "agent" in text and "0.80" in text and "25.00" in text
        assert "successful runs only" in text


class TestDistances:
    def test_stationary(self):
        assert base_joint_distances([RobotState(x=1.0)] * 5) == (0.0, 0.0)

    def test_square_loop(self):
        corners = [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)]
        base, joint = base_joint_distances([RobotState(x=x, y=y) for x, y in corners])
        assert base == pytest.approx(4.0)
        assert joint == 0.0

    def test_joint_swing(self):
        phis = [0.0, math.pi / 2, 0.0, -math.pi / 2, 0.0]
        _, joint = base_joint_distances([RobotState(phi1=p) for p in phis])
        assert joint == pytest.approx(2 * math.pi)

    def test_from_trace_dicts(self):
        header = {"state": {"x": 0.0, "y": 0.0, "theta": 0.0, "phi1": 0.0, "phi2": 0.0}}
        steps = [{"step": 1, "state": {"x": 3.0, "y": 4.0, "theta": 0.0, "phi1": 0.0, "phi2": 0.2}}]
        base, joint = base_joint_distances(trace_states(header, steps))
        assert base == pytest.approx(5.0)
        assert joint == pytest.approx(0.2)

    def test_empty_trace(self):
        with pytest.raises(ValueError):
            base_joint_distances([])


def test_smooth():
    np.testing.assert_allclose(smooth([5.0] * 10), np.full(10, 5.0))
    out = smooth([0.0, 10.0], alpha=0.5)
    np.testing.assert_allclose(out, [0.0, 5.0])


def test_rows_frame_passthrough(five_runs):
    df = rows_frame(five_runs)
    assert rows_frame(df) is df
    assert len(df) == 5
