"""2D LIDAR simulation with Gaussian noise and max-range dropout"""
import math
from dataclasses import dataclass

import numpy as np

from src.config import LidarConfig
from src.models import RobotState
from src.sim.geometry import cast_rays
from src.sim.world import WorldModel

MIN_RANGE = 1e-3


@dataclass(frozen=True, eq=False)
class Scan:
    ranges: np.ndarray  # (n_beams,), ordered by bearing

    def normalized(self, max_range: float) -> np.ndarray:
        return self.ranges / max_range


def beam_bearings(s: RobotState, cfg: LidarConfig) -> np.ndarray:
    """World-frame bearing of each beam."""
    i = np.arange(cfg.n_beams)
    return cfg.mount[2] + s.theta + cfg.fov * (i / (cfg.n_beams - 1) - 0.5)


def scan_origin(s: RobotState, cfg: LidarConfig) -> np.ndarray:
    c, si = math.cos(s.theta), math.sin(s.theta)
    mx, my, _ = cfg.mount
    return np.array([s.x + c * mx - si * my, s.y + si * mx + c * my])


def raw_ranges(world: WorldModel, s: RobotState, cfg: LidarConfig) -> np.ndarray:
    b = beam_bearings(s, cfg)
    dirs = np.stack([np.cos(b), np.sin(b)], axis=1)
    return cast_rays(scan_origin(s, cfg), dirs, cfg.max_range, world.arrays)


def simulate_scan(world: WorldModel, s: RobotState, cfg: LidarConfig, rng: np.random.Generator) -> Scan:
    """Noisy scan; noise is drawn even when sigma is 0 so rng consumption is config independent."""
    ranges = raw_ranges(world, s, cfg)
    noise = rng.normal(0.0, 1.0, cfg.n_beams) * cfg.noise_sigma
    dropped = rng.random(cfg.n_beams) < cfg.dropout_prob
    ranges = np.clip(ranges + noise, MIN_RANGE, cfg.max_range)
    ranges = np.where(dropped, cfg.max_range, ranges)
    return Scan(ranges=ranges)
