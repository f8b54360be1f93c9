"""Episode orchestration: reset/step, observation assembly, termination"""
import logging
import math
from pathlib import Path
from typing import Optional

import numpy as np

from src.config import AppConfig
from src.errors import NoPath, ResetFailed, SteppedAfterDone
from src.models import Action, EpisodeResult, Observation, Outcome, RobotState
from src.planning.pathref import RefPath, plan_ee_path, project
from src.rl.reward import StepContext, TERM_NAMES, reward_terms, total
from src.sim.geometry import point_shape
from src.sim.robot import (
    action_to_accels, collision_shapes, forward_kinematics, integrate, joint_limits_violated, world_to_ee_frame,
)
from src.sim.sensors import simulate_scan
from src.sim.world import WorldModel, generate_world, min_clearance, world_to_json
from src.storage.records import TraceRecorder

logger = logging.getLogger(__name__)


def evaluation_config(cfg: AppConfig) -> AppConfig:
    """Same setup with the fixed evaluation timeout."""
    return cfg.model_copy(update={"env": cfg.env.model_copy(update={"timeout_s": cfg.eval.timeout_s})})


class WbcEnv:
    """Single-threaded environment instance; one per rollout worker."""

    def __init__(self, cfg: AppConfig, tolerance: Optional[float] = None, trace_dir: Optional[str | Path] = None):
        self.cfg = cfg
        self.robot = cfg.robot
        self.reward_params = cfg.reward
        self.d_h = cfg.env.adr.d_h_max if tolerance is None else float(tolerance)
        timeout = cfg.env.timeout_s or cfg.reward.T_t
        self.timeout_steps = round(timeout / cfg.robot.control_period)
        self.hold_steps = cfg.reward.hold_steps
        self.trace_dir = Path(trace_dir) if trace_dir else None
        self.episode = 0
        self.world: Optional[WorldModel] = None
        self.state: Optional[RobotState] = None
        self.goal: Optional[np.ndarray] = None
        self.path: Optional[RefPath] = None
        self.result = EpisodeResult()
        self._trace: Optional[TraceRecorder] = None
        self._done = True
        self._rng = np.random.default_rng(0)
        self._progress = self._deviation = 0.0
        self._holding = 0.0
        self._in_sphere = False
        self._hold_count = 0

    @property
    def obs_dim(self) -> int:
        return self.cfg.lidar_front.n_beams + self.cfg.lidar_rear.n_beams + self.cfg.network.proprio_dim

    @property
    def done(self) -> bool:
        return self._done

    def set_tolerance(self, d_h: float):
        self.d_h = float(d_h)

    def reset(self, seed: int) -> Observation:
        """New randomized scene, spawn and goal; deterministic per seed."""
        rng = np.random.default_rng(seed)
        env_cfg = self.cfg.env
        world = generate_world(self.cfg.scenario, int(rng.integers(2**31)), self.robot, env_cfg.path_inflation)
        (lo1, hi1), (lo2, hi2) = self.robot.joint_pos_limits
        jr = env_cfg.spawn_joint_range
        for attempt in range(env_cfg.max_spawn_samples):
            x, y = world.spawn_region.sample(rng)
            theta = rng.uniform(-env_cfg.spawn_heading_range, env_cfg.spawn_heading_range)
            phi = rng.uniform(-jr, jr, 2)
            goal = world.goal_region.sample(rng)
            sensor_seed = int(rng.integers(2**31))
            start = RobotState(x=x, y=y, theta=theta,
                               phi1=float(np.clip(phi[0], lo1, hi1)), phi2=float(np.clip(phi[1], lo2, hi2)))
            if not self.spawn_is_clear(world, start):
                continue
            try:
                return self.reset_scenario(world, start, goal, sensor_seed)
            except NoPath:
                logger.debug(f"seed {seed}: spawn {attempt} has no reference path")
        raise ResetFailed(f"no collision-free spawn for seed {seed} in {env_cfg.max_spawn_samples} samples")

    def spawn_is_clear(self, world: WorldModel, start: RobotState) -> bool:
        if min_clearance(world, collision_shapes(start, self.robot)) <= 0.0:
            return False
        if joint_limits_violated(start, self.robot):
            return False
        ee = forward_kinematics(start, self.robot)[:2]
        return min_clearance(world, [point_shape(ee)]) >= self.cfg.env.path_inflation

    def reset_scenario(self, world: WorldModel, start: RobotState, goal, sensor_seed: int = 0) -> Observation:
        """Place robot and goal explicitly. Raises NoPath when no reference path exists."""
        self._close_trace()
        ee = np.array(forward_kinematics(start, self.robot)[:2])
        goal = np.asarray(goal, dtype=np.float64)
        self.path = plan_ee_path(world, ee, goal, self.cfg.env.path_inflation, self.cfg.env.grid_cell)
        self.world = world
        self.state = start
        self.goal = goal
        self._rng = np.random.default_rng(sensor_seed)
        self._progress, self._deviation = project(self.path, ee)
        self._holding = 0.0
        self._in_sphere = False
        self._hold_count = 0
        self.result = EpisodeResult(reward_terms={name: 0.0 for name in TERM_NAMES})
        self._done = False
        self.episode += 1
        obs, scans = self._observe()
        if self.trace_dir is not None:
            self._trace = TraceRecorder(self.trace_dir / f"episode_{self.episode:05d}.jsonl")
            self.result.trace_path = str(self._trace.path)
            self._trace.header({
                "world": world_to_json(world), "goal": goal, "path": self.path.to_json(),
                "d_h": self.d_h, "state": start.to_dict(), "scans": scans,
            })
        return obs

    def step(self, action: Action) -> tuple[Observation, float, bool, dict]:
        if self._done:
            raise SteppedAfterDone("step() called on a finished episode; call reset()")
        rp = self.reward_params
        prev = self.state
        self.state = state = integrate(prev, action_to_accels(action, self.robot), self.robot)

        shapes = collision_shapes(state, self.robot)
        clearance = min_clearance(self.world, shapes)
        collided = clearance == 0.0
        if rp.safety_margin_base_only:
            clearance = min_clearance(self.world, shapes[:1])
        limit = joint_limits_violated(state, self.robot)

        ee = np.array(forward_kinematics(state, self.robot)[:2])
        d_g = float(np.hypot(*(ee - self.goal)))
        in_sphere = d_g <= self.d_h
        self._hold_count = self._hold_count + 1 if in_sphere else 0

        s, d = project(self.path, ee)
        delta_progress = s - self._progress
        delta_dev = d - self._deviation if rp.deviation_mode == "signed_change" else d
        self._progress, self._deviation = s, d

        r = self.result
        r.steps += 1
        if collided:
            outcome = Outcome.COLLISION
        elif limit:
            outcome = Outcome.JOINT_LIMIT
        elif self._hold_count >= self.hold_steps:
            outcome = Outcome.HOLD_SUCCESS
        elif r.steps >= self.timeout_steps:
            outcome = Outcome.TIMEOUT
        else:
            outcome = Outcome.NONE

        ctx = StepContext(
            delta_deviation=delta_dev, delta_progress=delta_progress, path_length=self.path.total_length,
            base_speed=math.hypot(state.vx, state.vy), clearance=clearance, goal_distance=d_g,
            tolerance=self.d_h, in_sphere=in_sphere, was_in_sphere=self._in_sphere,
            termination=outcome, holding_prev=self._holding,
        )
        terms, self._holding = reward_terms(ctx, rp)
        reward = total(terms)
        self._in_sphere = in_sphere

        r.reward += reward
        for name, value in terms.items():
            r.reward_terms[name] += value
        r.base_distance += math.hypot(state.x - prev.x, state.y - prev.y)
        r.joint_distance += abs(state.phi1 - prev.phi1) + abs(state.phi2 - prev.phi2)
        r.outcome = outcome
        self._done = outcome != Outcome.NONE

        obs, scans = self._observe()
        if self._trace is not None:
            self._trace.record({
                "step": r.steps, "state": state.to_dict(), "action": list(action.indices),
                "reward": reward, "terms": terms, "scans": scans, "ee": ee, "d_g": d_g, "d_h": self.d_h,
            })
        if self._done:
            self._close_trace()
            logger.debug(f"episode {self.episode} ended: {outcome.value} after {r.steps} steps, reward {r.reward:.2f}")
        info = {
            "outcome": outcome, "steps": r.steps, "reward": r.reward, "terms": terms, "goal_distance": d_g,
            "base_distance": r.base_distance, "joint_distance": r.joint_distance,
        }
        return obs, reward, self._done, info

    def _observe(self) -> tuple[Observation, dict]:
        cfg, robot, state = self.cfg, self.robot, self.state
        front = simulate_scan(self.world, state, cfg.lidar_front, self._rng)
        rear = simulate_scan(self.world, state, cfg.lidar_rear, self._rng)
        clip = cfg.env.setpoint_clip
        setpoint = np.clip(world_to_ee_frame(state, robot, self.goal), -clip, clip) / clip
        vx, vy, vth, vphi = robot.vel_limits
        joint_scale = np.array([max(abs(lo), abs(hi)) for lo, hi in robot.joint_pos_limits])
        obs = Observation(
            scan_front=front.ranges / cfg.lidar_front.max_range,
            scan_rear=rear.ranges / cfg.lidar_rear.max_range,
            setpoint=setpoint,
            base_vel=np.array([state.vx / vx, state.vy / vy, state.omega / vth]),
            joint_pos=np.array([state.phi1, state.phi2]) / joint_scale,
            joint_vel=np.array([state.dphi1, state.dphi2]) / vphi,
        )
        return obs, {"front": front.ranges, "rear": rear.ranges}

    def _close_trace(self):
        if self._trace is not None:
            self._trace.close()
            self._trace = None

    def close(self):
        self._close_trace()
