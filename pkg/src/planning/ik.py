"""Goal configurations for an end-effector target: base sampling + analytic two-link IK"""
import logging
import math

import numpy as np

from src.config import RobotParams
from src.models import RobotState, wrap_angle
from src.sim.robot import collision_shapes, forward_kinematics, joint_limits_violated
from src.sim.world import WorldModel, in_collision

logger = logging.getLogger(__name__)

# Distinct solutions closer than this (per coordinate) are merged
DEDUPE_TOL = 1e-3


def solve_planar_ik(target, l1: float, l2: float) -> list[tuple[float, float]]:
    """
    Joint angles placing the tip of a 2-link chain rooted at the origin on `target`.

    Elbow-up and elbow-down solutions; a single one at full extension or folding. Empty if unreachable.
    """
    x, y = float(target[0]), float(target[1])
    c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    if abs(c2) > 1.0 + 1e-9:
        return []
    c2 = min(1.0, max(-1.0, c2))
    s2 = math.sqrt(1.0 - c2 * c2)
    solutions = []
    for sign in ((1.0,) if s2 < 1e-6 else (1.0, -1.0)):
        phi2 = math.atan2(sign * s2, c2)
        phi1 = math.atan2(y, x) - math.atan2(l2 * math.sin(phi2), l1 + l2 * math.cos(phi2))
        solutions.append((wrap_angle(phi1), phi2))
    return solutions


def ik_for_base(x: float, y: float, theta: float, ee_target, p: RobotParams) -> list[RobotState]:
    """Arm solutions for a fixed base pose, within joint limits (collisions unchecked)."""
    c, s = math.cos(theta), math.sin(theta)
    mx, my = p.arm_mount_offset
    dx = ee_target[0] - (x + c * mx - s * my)
    dy = ee_target[1] - (y + s * mx + c * my)
    local = (c * dx + s * dy, -s * dx + c * dy)
    states = []
    for phi1, phi2 in solve_planar_ik(local, p.l1, p.l2):
        state = RobotState(x=x, y=y, theta=theta, phi1=phi1, phi2=phi2)
        if not joint_limits_violated(state, p):
            states.append(state)
    return states


def ik_goal_configs(world: WorldModel, ee_target, tol: float, n: int, rng: np.random.Generator,
                    p: RobotParams, attempts: int = 400) -> list[np.ndarray]:
    """Up to n collision-free configurations whose end-effector lies within tol of ee_target."""
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    target = np.asarray(ee_target, dtype=np.float64)
    b = world.bounds
    r_min, r_max = abs(p.l1 - p.l2), p.l1 + p.l2
    mx, my = p.arm_mount_offset
    found: list[np.ndarray] = []
    for _ in range(attempts):
        theta = rng.uniform(-math.pi, math.pi)
        alpha = rng.uniform(-math.pi, math.pi)
        r = math.sqrt(rng.uniform(r_min * r_min, r_max * r_max))
        mount = target - r * np.array([math.cos(alpha), math.sin(alpha)])
        c, s = math.cos(theta), math.sin(theta)
        x, y = mount[0] - (c * mx - s * my), mount[1] - (s * mx + c * my)
        if not (b.xmin <= x <= b.xmax and b.ymin <= y <= b.ymax):
            continue
        for state in ik_for_base(x, y, theta, target, p):
            ee = forward_kinematics(state, p)[:2]
            if math.dist(ee, target) > tol or in_collision(world, collision_shapes(state, p)):
                continue
            q = state.config
            if any(np.all(np.abs(q - other) < DEDUPE_TOL) for other in found):
                continue
            found.append(q)
            if len(found) >= n:
                return found
    if not found:
        logger.debug(f"no IK goal configuration for target {target.tolist()} in {attempts} samples")
    return found
