import numpy as np
import pytest
from pydantic import ValidationError

from src.analysis import evaluation
from src.analysis.evaluation import TaskSpec, load_task, run_eval, sample_task_instance
from src.analysis.metrics import MetricsRow
from src.errors import ConfigError
from src.rl.policy import init_params
from src.sim.robot import forward_kinematics


@pytest.fixture
def task1() -> TaskSpec:
    return load_task(1)


@pytest.mark.parametrize("task_id", [1, 2, 3, 4])
def test_fixtures_load(task_id):
    task = load_task(task_id)
    assert task.task_id == task_id
    assert task.tolerance == 0.07 and task.timeout_s == 180.0
    world = task.world_model()
    assert world.obstacles


def test_unknown_task():
    with pytest.raises(ConfigError):
        load_task(5)


def test_tolerance_is_fixed(task1):
    with pytest.raises(ValidationError):
        TaskSpec.model_validate({**task1.model_dump(), "tolerance": 0.1})


def test_missing_fixture(tmp_path):
    with pytest.raises(ConfigError):
        load_task(2, tmp_path)


def test_instance_reproducible(task1, cfg):
    world = task1.world_model()
    a = sample_task_instance(world, cfg, np.random.default_rng([0, 1, 3]))
    b = sample_task_instance(world, cfg, np.random.default_rng([0, 1, 3]))
    assert a[0] == b[0]
    np.testing.assert_array_equal(a[1], b[1])
    assert world.goal_region.contains(a[1])
    assert world.spawn_region.contains((a[0].x, a[0].y))


def test_agent_runs(task1, cfg, tmp_path):
    params = init_params(cfg, 0).zeros_like()
    out = tmp_path / "agent.csv"
    rows = run_eval("agent", task1, 2, seed=7, cfg=cfg, params=params, out_csv=out)
    assert [r.run for r in rows] == [0, 1]
    assert all(r.task == 1 and r.seed == 7 and r.planning_time == 0.0 for r in rows)
    assert all(r.outcome != "error" for r in rows)
    assert out.read_text().count("\n") == 3


def test_agent_needs_params(task1, cfg):
    with pytest.raises(ConfigError):
        run_eval("agent", task1, 1, seed=0, cfg=cfg)


def test_methods_see_same_instances(task1, cfg, monkeypatch):
    seen = {"agent": [], "baseline": []}

    def fake_agent(params, world, start, goal, cfg, sensor_seed, trace_dir=None):
        seen["agent"].append((start, tuple(goal), sensor_seed))
        return evaluation._failed_row("agent", "timeout")

    def fake_baseline(world, start, goal, cfg, rng, sensor_seed, trace_dir=None):
        seen["baseline"].append((start, tuple(goal), sensor_seed))
        return evaluation._failed_row("baseline", "timeout")

    monkeypatch.setattr(evaluation, "run_agent", fake_agent)
    monkeypatch.setattr(evaluation, "run_baseline", fake_baseline)
    run_eval("agent", task1, 3, seed=11, cfg=cfg, params=init_params(cfg, 0))
    run_eval("baseline", task1, 3, seed=11, cfg=cfg)
    assert seen["agent"] == seen["baseline"]
    assert len({s[1] for s in seen["agent"]}) == 3


def test_run_errors_become_failed_rows(task1, cfg, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(evaluation, "run_baseline", broken)
    rows = run_eval("baseline", task1, 2, seed=0, cfg=cfg)
    assert [r.outcome for r in rows] == ["error", "error"]
    assert not any(r.success for r in rows)
    assert rows[1].run == 1


@pytest.mark.slow
def test_baseline_run(task1, cfg, tmp_path):
    (row,) = run_eval("baseline", task1, 1, seed=3, cfg=cfg, out_csv=tmp_path / "baseline.csv")
    assert isinstance(row, MetricsRow)
    assert row.method == "baseline"
    assert row.planning_time > 0.0
    if row.success:
        assert row.total_time == pytest.approx(row.planning_time + row.execution_time)
