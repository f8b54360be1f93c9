"""Holonomic base + planar two-link arm: integration, kinematics, collision geometry"""
import math

import numpy as np

from src.config import RobotParams
from src.models import Action, N_BINS, RobotState, wrap_angle
from src.sim.geometry import ConvexShape, capsule, oriented_rect

# Accelerations per index as a fraction of the dimension's limit
ACCEL_LEVELS = np.linspace(-1.0, 1.0, N_BINS)


def acc_limit_vector(p: RobotParams) -> np.ndarray:
    ax, ay, ath, aphi = p.acc_limits
    return np.array([ax, ay, ath, aphi, aphi])


def vel_limit_vector(p: RobotParams) -> np.ndarray:
    vx, vy, vth, vphi = p.vel_limits
    return np.array([vx, vy, vth, vphi, vphi])


def action_to_accels(a: Action, p: RobotParams) -> np.ndarray:
    """Index k maps to a linearly spaced value in {-A, -A/2, 0, A/2, A}."""
    return ACCEL_LEVELS[list(a.indices)] * acc_limit_vector(p)


def integrate(s: RobotState, acc, p: RobotParams) -> RobotState:
    """One semi-implicit Euler step: clamp velocities, then move with the new velocities."""
    tau = p.control_period
    lim = vel_limit_vector(p)
    vel = np.clip(s.velocities + np.asarray(acc, dtype=np.float64) * tau, -lim, lim)
    vx, vy, omega, dphi1, dphi2 = (float(v) for v in vel)
    c, si = math.cos(s.theta), math.sin(s.theta)
    return RobotState(
        x=s.x + (c * vx - si * vy) * tau,
        y=s.y + (si * vx + c * vy) * tau,
        theta=wrap_angle(s.theta + omega * tau),
        vx=vx, vy=vy, omega=omega,
        phi1=s.phi1 + dphi1 * tau,
        phi2=s.phi2 + dphi2 * tau,
        dphi1=dphi1, dphi2=dphi2,
    )


def arm_points(s: RobotState, p: RobotParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """World positions of the arm mount, elbow and end-effector."""
    c, si = math.cos(s.theta), math.sin(s.theta)
    mx, my = p.arm_mount_offset
    mount = np.array([s.x + c * mx - si * my, s.y + si * mx + c * my])
    a1 = s.theta + s.phi1
    elbow = mount + p.l1 * np.array([math.cos(a1), math.sin(a1)])
    a2 = a1 + s.phi2
    ee = elbow + p.l2 * np.array([math.cos(a2), math.sin(a2)])
    return mount, elbow, ee


def forward_kinematics(s: RobotState, p: RobotParams) -> tuple[float, float, float]:
    """End-effector (x, y, heading) in the world frame."""
    _, _, ee = arm_points(s, p)
    return float(ee[0]), float(ee[1]), wrap_angle(s.theta + s.phi1 + s.phi2)


def collision_shapes(s: RobotState, p: RobotParams) -> list[ConvexShape]:
    """Base rectangle, then upper and lower link capsules."""
    mount, elbow, ee = arm_points(s, p)
    return [
        base_shape(s, p),
        capsule(mount, elbow, p.link_radius),
        capsule(elbow, ee, p.link_radius),
    ]


def base_shape(s: RobotState, p: RobotParams) -> ConvexShape:
    return oriented_rect((s.x, s.y), p.base_half_extents, s.theta)


def world_to_ee_frame(s: RobotState, p: RobotParams, pt) -> np.ndarray:
    x, y, h = forward_kinematics(s, p)
    dx, dy = pt[0] - x, pt[1] - y
    c, si = math.cos(h), math.sin(h)
    return np.array([c * dx + si * dy, -si * dx + c * dy])


def ee_frame_to_world(s: RobotState, p: RobotParams, pt) -> np.ndarray:
    x, y, h = forward_kinematics(s, p)
    c, si = math.cos(h), math.sin(h)
    return np.array([x + c * pt[0] - si * pt[1], y + si * pt[0] + c * pt[1]])


def joint_limits_violated(s: RobotState, p: RobotParams) -> bool:
    (lo1, hi1), (lo2, hi2) = p.joint_pos_limits
    return not (lo1 <= s.phi1 <= hi1 and lo2 <= s.phi2 <= hi2)
