"""Domain models - robot state, actions, observations, episode results"""
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np


def wrap_angle(theta: float) -> float:
    """Wrap to (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2 * math.pi)


@dataclass(frozen=True)
class RobotState:
    """Full dynamic state. Base velocity is expressed in the body frame."""
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    omega: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    dphi1: float = 0.0
    dphi2: float = 0.0

    @property
    def config(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta, self.phi1, self.phi2])

    @property
    def velocities(self) -> np.ndarray:
        return np.array([self.vx, self.vy, self.omega, self.dphi1, self.dphi2])

    @classmethod
    def from_config(cls, q) -> "RobotState":
        x, y, theta, phi1, phi2 = (float(v) for v in q)
        return cls(x=x, y=y, theta=wrap_angle(theta), phi1=phi1, phi2=phi2)

    def to_dict(self) -> dict:
        return asdict(self)


N_BLOCKS = 5
N_BINS = 5


@dataclass(frozen=True)
class Action:
    """Five discrete acceleration indices ordered (xb'', yb'', thb'', phi1'', phi2'')."""
    indices: tuple[int, int, int, int, int]

    def __post_init__(self):
        if len(self.indices) != N_BLOCKS:
            raise ValueError(f"action needs {N_BLOCKS} indices, got {len(self.indices)}")
        if any(not 0 <= int(i) < N_BINS for i in self.indices):
            raise ValueError(f"action indices must be in [0, {N_BINS - 1}], got {self.indices}")
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))

    @classmethod
    def neutral(cls) -> "Action":
        return cls((2, 2, 2, 2, 2))


@dataclass(frozen=True)
class Observation:
    """Normalized network input."""
    scan_front: np.ndarray
    scan_rear: np.ndarray
    setpoint: np.ndarray
    base_vel: np.ndarray
    joint_pos: np.ndarray
    joint_vel: np.ndarray

    @property
    def proprio(self) -> np.ndarray:
        return np.concatenate([self.setpoint, self.base_vel, self.joint_pos, self.joint_vel])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.scan_front, self.scan_rear, self.proprio]).astype(np.float32)

    def __len__(self) -> int:
        return len(self.scan_front) + len(self.scan_rear) + len(self.proprio)


class Outcome(str, Enum):
    NONE = "none"
    COLLISION = "collision"
    JOINT_LIMIT = "joint_limit"
    HOLD_SUCCESS = "hold_success"
    TIMEOUT = "timeout"


@dataclass
class EpisodeResult:
    outcome: Outcome = Outcome.NONE
    steps: int = 0
    reward: float = 0.0
    base_distance: float = 0.0
    joint_distance: float = 0.0
    trace_path: Optional[str] = None
    reward_terms: dict[str, float] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return self.outcome == Outcome.HOLD_SUCCESS

    @property
    def done(self) -> bool:
        return self.outcome != Outcome.NONE
