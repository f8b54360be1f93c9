"""Configuration - single source of truth"""
import json
import math
from functools import lru_cache
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.errors import ConfigError

PACKAGE_DIR = Path(__file__).parent


class Settings(BaseSettings):
    """
    Runtime settings loaded from environment variables (prefix WBC_) or a .env file.

    Experiment parameters live in AppConfig; this only covers where things go and how loud we are.
    """
    model_config = SettingsConfigDict(env_prefix="WBC_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    data_dir: Path = Path("runs")
    tasks_dir: Path = PACKAGE_DIR / "fixtures" / "tasks"


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance. Override env vars before first call in tests."""
    return Settings()


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_range(name: str, lo_hi: tuple[float, float]):
    lo, hi = lo_hi
    if lo < 0 or hi < 0:
        raise ValueError(f"{name} must be nonnegative, got {lo_hi}")
    if lo > hi:
        raise ValueError(f"{name} min ({lo}) must be <= max ({hi})")


class RobotParams(_Section):
    base_half_extents: tuple[float, float] = Field((0.48, 0.395), description="base rectangle half sizes [m]")
    arm_mount_offset: tuple[float, float] = Field((0.24, 0.0), description="arm mount point in base frame [m]")
    l1: float = Field(0.316, gt=0, description="first link length [m]")
    l2: float = Field(0.30, gt=0, description="second link length [m]")
    link_radius: float = Field(0.06, gt=0, description="link capsule half-width [m]")
    joint_pos_limits: tuple[tuple[float, float], tuple[float, float]] = Field(
        ((-2.8, 2.8), (-2.8, 2.8)), description="joint position limits per joint [rad]")
    vel_limits: tuple[float, float, float, float] = Field(
        (0.1, 0.1, 0.2, 0.5), description="|xb'|, |yb'| [m/s], |thb'| [rad/s], |phi'| [rad/s]")
    acc_limits: tuple[float, float, float, float] = Field(
        (0.15, 0.15, 0.3, 0.8), description="|xb''|, |yb''| [m/s^2], |thb''|, |phi''| [rad/s^2]")
    control_period: float = Field(0.04, gt=0, description="control period tau [s]")

    @model_validator(mode="after")
    def _positive(self) -> "RobotParams":
        if min(self.base_half_extents) <= 0:
            raise ValueError("base_half_extents must be positive")
        if min(self.vel_limits) <= 0 or min(self.acc_limits) <= 0:
            raise ValueError("velocity and acceleration limits must be positive")
        for lo, hi in self.joint_pos_limits:
            if lo >= hi:
                raise ValueError(f"joint limit min ({lo}) must be < max ({hi})")
        return self

    @property
    def joint_vel_limit(self) -> float:
        return self.vel_limits[3]

    @property
    def reach(self) -> float:
        return self.l1 + self.l2


class LidarConfig(_Section):
    mount: tuple[float, float, float] = Field((0.48, 0.395, 0.0), description="mount pose x [m], y [m], yaw [rad] in base frame")
    fov: float = Field(1.5 * math.pi, description="field of view [rad]")
    n_beams: int = Field(64, ge=2, description="beams per scan [count]")
    max_range: float = Field(5.0, gt=0, description="maximum range [m]")
    noise_sigma: float = Field(0.01, ge=0, description="Gaussian range noise std [m]")
    dropout_prob: float = Field(0.02, ge=0, le=1, description="per-beam max-range dropout probability [-]")

    @model_validator(mode="after")
    def _fov(self) -> "LidarConfig":
        if not 0 < self.fov <= 2 * math.pi:
            raise ValueError(f"fov must be in (0, 2pi], got {self.fov}")
        return self


def _rear_lidar() -> LidarConfig:
    return LidarConfig(mount=(-0.48, -0.395, math.pi))


class ScenarioSpec(_Section):
    corridor_width_range: tuple[float, float] = Field((1.5, 3.0), description="corridor width [m]")
    corridor_length_range: tuple[float, float] = Field((8.0, 14.0), description="corridor length [m]")
    shelf_count_range: tuple[int, int] = Field((1, 3), description="number of shelves [count]")
    shelf_depth_range: tuple[float, float] = Field((0.3, 0.6), description="shelf depth into corridor [m]")
    shelf_width_range: tuple[float, float] = Field((0.8, 2.0), description="shelf width along corridor [m]")
    door_count_range: tuple[int, int] = Field((0, 2), description="number of doorway gaps [count]")
    door_width_range: tuple[float, float] = Field((0.8, 1.2), description="doorway gap width [m]")
    spawn_semi_axes: tuple[float, float] = Field((0.5, 0.3), description="spawn ellipse semi-axes cap [m]")
    fixed_layout: Optional[dict] = Field(None, description="explicit world JSON document; bypasses sampling")
    seedable: bool = Field(True, description="sampling driven by the reset seed")

    @model_validator(mode="after")
    def _ranges(self) -> "ScenarioSpec":
        for name in ("corridor_width_range", "corridor_length_range", "shelf_count_range",
                     "shelf_depth_range", "shelf_width_range", "door_count_range", "door_width_range"):
            _check_range(name, getattr(self, name))
        if self.corridor_width_range[0] <= 0 or self.corridor_length_range[0] <= 0:
            raise ValueError("corridor dimensions must be positive")
        return self


class RewardParams(_Section):
    w_t: float = Field(-15.0, description="time penalty total [-]")
    T_t: float = Field(120.0, gt=0, description="episode timeout [s]")
    w_pd: float = Field(-10.0, description="path deviation weight [1/m]")
    w_pt: float = Field(30.0, description="path progress total [-]")
    w_sm: float = Field(-1.0, description="safety margin weight [1/m]")
    d_th: float = Field(0.3, gt=0, description="safety margin threshold [m]")
    w_ht: float = Field(20.0, description="holding time total [-]")
    w_hd: float = Field(40.0, description="holding distance total [-]")
    T_h: float = Field(1.5, gt=0, description="required holding time [s]")
    tau: float = Field(0.04, gt=0, description="control period [s]")
    D_c: float = Field(-60.0, description="collision terminal reward [-]")
    D_l: float = Field(-20.0, description="joint limit terminal reward [-]")
    D_h: float = Field(10.0, description="hold success terminal reward [-]")
    deviation_mode: Literal["signed_change", "absolute"] = Field(
        "signed_change", description="path deviation term uses per-step change or absolute deviation")
    safety_margin_base_only: bool = Field(True, description="d_sm measured for the base only (else base+links)")

    @property
    def hold_steps(self) -> int:
        return math.ceil(self.T_h / self.tau - 1e-9)

    @property
    def timeout_steps(self) -> int:
        return round(self.T_t / self.tau)


class AdrConfig(_Section):
    window: int = Field(100, ge=1, description="episodes per success window [count]")
    threshold: float = Field(0.7, ge=0, le=1, description="success rate that tightens d_h [-]")
    decay: float = Field(0.9, gt=0, lt=1, description="multiplicative d_h decay [-]")
    d_h_max: float = Field(0.5, gt=0, description="initial tolerance radius [m]")
    d_h_min: float = Field(0.07, gt=0, description="final tolerance radius [m]")

    @model_validator(mode="after")
    def _bounds(self) -> "AdrConfig":
        if self.d_h_min > self.d_h_max:
            raise ValueError(f"d_h_min ({self.d_h_min}) must be <= d_h_max ({self.d_h_max})")
        return self


class EnvConfig(_Section):
    adr: AdrConfig = AdrConfig()
    timeout_s: Optional[float] = Field(None, gt=0, description="episode timeout override [s]; default T_t")
    path_inflation: float = Field(0.10, gt=0, description="reference path obstacle inflation [m]")
    grid_cell: float = Field(0.05, gt=0, description="reference path grid cell [m]")
    spawn_heading_range: float = Field(0.5, ge=0, description="spawn heading half-range [rad]")
    spawn_joint_range: float = Field(1.0, ge=0, description="spawn joint position half-range [rad]")
    setpoint_clip: float = Field(10.0, gt=0, description="setpoint clipping in EE frame [m]")
    max_spawn_samples: int = Field(1000, ge=1, description="spawn rejection samples [count]")


class NetworkSpec(_Section):
    conv1: tuple[int, int, int] = Field((5, 2, 8), description="scan conv 1 kernel, stride, channels")
    conv2: tuple[int, int, int] = Field((3, 1, 16), description="scan conv 2 kernel, stride, channels")
    pool: int = Field(2, ge=1, description="max-pool window [count]")
    scan_features: int = Field(64, description="scan branch output width")
    fusion_widths: tuple[int, ...] = Field((128, 96, 64), description="fusion dense layer widths")
    body_widths: tuple[int, ...] = Field((64, 64, 56, 48, 48, 40, 36, 32), description="proprioceptive dense widths")
    n_blocks: int = Field(5, description="action dimensions [count]")
    n_bins: int = Field(5, description="discretization levels per dimension [count]")
    leaky_slope: float = Field(0.01, ge=0, description="LeakyReLU negative slope [-]")
    proprio_dim: int = Field(9, description="setpoint + velocities + joints [count]")


class TrainConfig(_Section):
    n_workers: int = Field(4, ge=1, description="parallel rollout workers [count]")
    n_steps: int = Field(2048, ge=1, description="steps per worker per rollout [count]")
    nminibatches: int = Field(8, ge=1, description="minibatches per epoch [count]")
    noptepochs: int = Field(30, ge=1, description="epochs per update [count]")
    cliprange: float = Field(0.2, gt=0, description="policy ratio clip [-]")
    cliprange_vf: float = Field(-1.0, description="value clip, negative disables [-]")
    ent_coeff: float = Field(0.00376, ge=0, description="entropy bonus coefficient [-]")
    gamma: float = Field(0.999, gt=0, le=1, description="discount [-]")
    lam: float = Field(0.8, ge=0, le=1, description="GAE lambda [-]")
    lr_start: float = Field(1e-3, gt=0, description="initial learning rate [-]")
    lr_end: float = Field(0.15e-3, gt=0, description="final learning rate [-]")
    total_steps: int = Field(3_000_000, ge=1, description="environment steps [count]")
    value_coeff: float = Field(0.5, ge=0, description="value loss coefficient [-]")
    max_grad_norm: float = Field(0.5, gt=0, description="gradient norm clip [-]")
    adam_betas: tuple[float, float] = Field((0.9, 0.999), description="Adam betas [-]")
    adam_eps: float = Field(1e-5, gt=0, description="Adam epsilon [-]")
    checkpoint_every: int = Field(10, ge=1, description="updates between checkpoints [count]")
    seed: int = Field(0, description="master seed")

    @model_validator(mode="after")
    def _divisible(self) -> "TrainConfig":
        batch = self.n_workers * self.n_steps
        if batch % self.nminibatches:
            raise ValueError(f"nminibatches ({self.nminibatches}) must divide n_workers*n_steps ({batch})")
        return self


class BaselineParams(_Section):
    eta: float = Field(0.3, gt=0, description="extend step [metric m]")
    epsilon: float = Field(0.01, gt=0, description="edge collision resolution [metric m]")
    attempts: int = Field(20, ge=1, description="planning attempts [count]")
    time_budget: float = Field(180.0, gt=0, description="planning time limit [s]")
    max_iterations: int = Field(5000, ge=1, description="tree expansions per attempt [count]")
    goal_configs: int = Field(8, ge=1, description="IK goal configurations seeded [count]")
    ik_attempts: int = Field(400, ge=1, description="IK base samples [count]")
    kp: float = Field(1.0, ge=0, description="execution tracking gain [1/s]")


class EvalConfig(_Section):
    tolerance: float = Field(0.07, description="setpoint tolerance [m]")
    timeout_s: float = Field(180.0, description="execution timeout [s]")
    n_runs: int = Field(100, ge=1, description="runs per task and method [count]")

    @model_validator(mode="after")
    def _fixed_values(self) -> "EvalConfig":
        if self.tolerance != 0.07 or self.timeout_s != 180.0:
            raise ValueError("evaluation tolerance (0.07 m) and timeout (180 s) are fixed")
        return self


class AppConfig(_Section):
    robot: RobotParams = RobotParams()
    lidar_front: LidarConfig = LidarConfig()
    lidar_rear: LidarConfig = Field(default_factory=_rear_lidar)
    scenario: ScenarioSpec = ScenarioSpec()
    reward: RewardParams = RewardParams()
    env: EnvConfig = EnvConfig()
    network: NetworkSpec = NetworkSpec()
    train: TrainConfig = TrainConfig()
    baseline: BaselineParams = BaselineParams()
    eval: EvalConfig = EvalConfig()

    @model_validator(mode="after")
    def _consistent(self) -> "AppConfig":
        if abs(self.robot.control_period - self.reward.tau) > 1e-12:
            raise ValueError("robot.control_period and reward.tau must match")
        if self.lidar_front.n_beams != self.lidar_rear.n_beams:
            raise ValueError("front and rear scans must have the same beam count")
        return self


def load_config(path: Optional[str | Path] = None, overrides: Optional[dict] = None) -> AppConfig:
    """Load JSON config; None gives full defaults. Raises ConfigError naming the bad key."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed JSON in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    for dotted, value in (overrides or {}).items():
        node = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        node[leaf] = value
    try:
        return AppConfig.model_validate(data)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(f"invalid config key '{key}': {err['msg']}", key=key) from e


def describe_config() -> list[str]:
    """One line per config key: dotted name, default and description with units."""
    lines = []

    def walk(model: type[BaseModel], instance: BaseModel, prefix: str):
        for name, field in model.model_fields.items():
            value = getattr(instance, name)
            if isinstance(value, BaseModel):
                walk(type(value), value, f"{prefix}{name}.")
            else:
                lines.append(f"{prefix}{name} = {value!r}  {field.description or ''}".rstrip())

    walk(AppConfig, AppConfig(), "")
    return lines
