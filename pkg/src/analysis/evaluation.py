"""Evaluation harness: the four task scenes, paired start/goal sampling, agent and baseline runs"""
import json
import logging
import time
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.analysis.metrics import MetricsRow
from src.config import AppConfig, get_settings
from src.errors import ConfigError, NoPath, PlanningFailed, WbcError
from src.models import RobotState
from src.planning.executor import execute
from src.planning.ik import ik_goal_configs
from src.planning.pathref import plan_ee_path
from src.planning.rrt import plan_rrt_connect
from src.planning.trajectory import time_parameterize
from src.rl.env import WbcEnv, evaluation_config
from src.rl.policy import PolicyParams, argmax_action, forward
from src.sim.robot import acc_limit_vector, forward_kinematics, vel_limit_vector
from src.sim.world import WorldModel, world_from_json
from src.storage.records import CsvAppender

logger = logging.getLogger(__name__)

TASK_IDS = (1, 2, 3, 4)
# IK goal configurations must put the end-effector this close to the setpoint
IK_TOLERANCE = 0.02
MAX_INSTANCE_SAMPLES = 1000

Method = Literal["agent", "baseline"]


class TaskSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    task_id: int = Field(ge=1, le=4)
    name: str
    description: str = ""
    world: dict
    tolerance: float = 0.07
    timeout_s: float = 180.0

    @field_validator("tolerance")
    @classmethod
    def _tolerance(cls, v: float) -> float:
        if v != 0.07:
            raise ValueError("evaluation tolerance is fixed at 0.07 m")
        return v

    @field_validator("timeout_s")
    @classmethod
    def _timeout(cls, v: float) -> float:
        if v != 180.0:
            raise ValueError("evaluation timeout is fixed at 180 s")
        return v

    def world_model(self) -> WorldModel:
        return world_from_json(self.world)


def load_task(task_id: int, tasks_dir: Optional[str | Path] = None) -> TaskSpec:
    if task_id not in TASK_IDS:
        raise ConfigError(f"unknown task id {task_id}; expected one of {TASK_IDS}", key="task")
    path = Path(tasks_dir or get_settings().tasks_dir) / f"task{task_id}.json"
    try:
        return TaskSpec.model_validate(json.loads(path.read_text()))
    except FileNotFoundError as e:
        raise ConfigError(f"task fixture not found: {path}", key="task") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid task fixture {path}: {e}", key="task") from e


def sample_task_instance(world: WorldModel, cfg: AppConfig, rng: np.random.Generator) -> tuple[RobotState, np.ndarray]:
    """Feasible start (clear spawn, reference path exists) and setpoint; same rng -> same pair."""
    env = WbcEnv(cfg)
    jr = cfg.env.spawn_joint_range
    for _ in range(MAX_INSTANCE_SAMPLES):
        x, y = world.spawn_region.sample(rng)
        theta = rng.uniform(-cfg.env.spawn_heading_range, cfg.env.spawn_heading_range)
        phi = rng.uniform(-jr, jr, 2)
        goal = np.array(world.goal_region.sample(rng))
        start = RobotState(x=x, y=y, theta=theta, phi1=float(phi[0]), phi2=float(phi[1]))
        if not env.spawn_is_clear(world, start):
            continue
        try:
            plan_ee_path(world, forward_kinematics(start, cfg.robot)[:2], goal, cfg.env.path_inflation, cfg.env.grid_cell)
        except NoPath:
            continue
        return start, goal
    raise WbcError(f"no feasible start/goal pair in {MAX_INSTANCE_SAMPLES} samples")


def run_agent(params: PolicyParams, world: WorldModel, start: RobotState, goal, cfg: AppConfig,
              sensor_seed: int, trace_dir: Optional[Path] = None) -> MetricsRow:
    env = WbcEnv(evaluation_config(cfg), tolerance=cfg.eval.tolerance, trace_dir=trace_dir)
    obs = env.reset_scenario(world, start, goal, sensor_seed)
    done = False
    while not done:
        logits, _ = forward(params, obs)
        obs, _, done, _ = env.step(argmax_action(logits))
    r = env.result
    execution = r.steps * cfg.robot.control_period
    return MetricsRow(method="agent", task=0, run=0, seed=0, success=r.success, outcome=r.outcome.value,
                      total_time=execution, planning_time=0.0, execution_time=execution,
                      base_distance=r.base_distance, joint_distance=r.joint_distance)


def run_baseline(world: WorldModel, start: RobotState, goal, cfg: AppConfig, rng: np.random.Generator,
                 sensor_seed: int, trace_dir: Optional[Path] = None) -> MetricsRow:
    """IK goal seeding + RRT-Connect, then tracked execution. Planning failures become failed rows."""
    bp, robot = cfg.baseline, cfg.robot
    t0 = time.perf_counter()
    goals = ik_goal_configs(world, goal, IK_TOLERANCE, bp.goal_configs, rng, robot, bp.ik_attempts)
    if not goals:
        planning = time.perf_counter() - t0
        return _failed_row("baseline", "ik_failed", planning)
    try:
        plan = plan_rrt_connect(world, start.config, goals, bp, robot, rng)
    except PlanningFailed as e:
        planning = time.perf_counter() - t0
        logger.info(f"baseline planning failed: {e}")
        return _failed_row("baseline", "planning_failed", planning)
    planning = time.perf_counter() - t0
    traj = time_parameterize(plan.path, vel_limit_vector(robot), acc_limit_vector(robot))
    env = WbcEnv(evaluation_config(cfg), tolerance=cfg.eval.tolerance, trace_dir=trace_dir)
    env.reset_scenario(world, start, goal, sensor_seed)
    r = execute(traj, env, bp.kp)
    execution = r.steps * robot.control_period
    return MetricsRow(method="baseline", task=0, run=0, seed=0, success=r.success, outcome=r.outcome.value,
                      total_time=planning + execution, planning_time=planning, execution_time=execution,
                      base_distance=r.base_distance, joint_distance=r.joint_distance)


def _failed_row(method: str, outcome: str, planning: float = 0.0) -> MetricsRow:
    return MetricsRow(method=method, task=0, run=0, seed=0, success=False, outcome=outcome,
                      total_time=planning, planning_time=planning, execution_time=0.0,
                      base_distance=0.0, joint_distance=0.0)


def run_eval(method: Method, task: TaskSpec, n_runs: int, seed: int, cfg: Optional[AppConfig] = None,
             params: Optional[PolicyParams] = None, out_csv: Optional[str | Path] = None,
             trace_dir: Optional[str | Path] = None) -> list[MetricsRow]:
    """
    n_runs independent runs; run i draws its start/goal from rng([seed, task, i]) so both
    methods face identical instances. Rows are appended to out_csv as they finish.
    """
    cfg = cfg or AppConfig()
    if method == "agent" and params is None:
        raise ConfigError("agent evaluation needs a policy checkpoint", key="checkpoint")
    if method not in ("agent", "baseline"):
        raise ConfigError(f"unknown method {method!r}", key="method")
    world = task.world_model()
    appender = CsvAppender(out_csv, MetricsRow.columns()) if out_csv else None
    rows = []
    for i in range(n_runs):
        rng = np.random.default_rng([seed, task.task_id, i])
        run_trace = Path(trace_dir) / f"{method}_task{task.task_id}_run{i:03d}" if trace_dir else None
        try:
            start, goal = sample_task_instance(world, cfg, rng)
            sensor_seed = int(rng.integers(2**31))
            if method == "agent":
                row = run_agent(params, world, start, goal, cfg, sensor_seed, run_trace)
            else:
                row = run_baseline(world, start, goal, cfg, np.random.default_rng([seed, task.task_id, i, 1]),
                                   sensor_seed, run_trace)
        except Exception as e:
            logger.warning(f"{method} task {task.task_id} run {i} errored: {type(e).__name__}: {e}")
            row = _failed_row(method, "error")
        row.task, row.run, row.seed = task.task_id, i, seed
        rows.append(row)
        if appender:
            appender.append(row.to_dict())
        logger.info(f"{method} task {task.task_id} run {i + 1}/{n_runs}: {row.outcome}, "
                    f"{row.total_time:.1f} s")
    return rows
