"""Track a timed trajectory in the simulator through the discrete acceleration interface"""
import logging
import math

import numpy as np

from src.models import Action, EpisodeResult
from src.planning.rrt import wrap_diff
from src.planning.trajectory import TimedTrajectory
from src.rl.env import WbcEnv
from src.sim.robot import ACCEL_LEVELS, acc_limit_vector

logger = logging.getLogger(__name__)


def nearest_action(acc_desired, acc_limits: np.ndarray) -> Action:
    """Per dimension, the discrete level closest to the desired acceleration."""
    levels = ACCEL_LEVELS[None, :] * acc_limits[:, None]
    idx = np.argmin(np.abs(levels - np.asarray(acc_desired)[:, None]), axis=1)
    return Action(tuple(int(i) for i in idx))


def execute(traj: TimedTrajectory, env: WbcEnv, kp: float = 1.0) -> EpisodeResult:
    """
    Feedforward velocity plus proportional correction, converted to the body frame and
    snapped to the nearest acceleration level each tick. Runs until the env ends the episode
    (hold success, collision, joint limit or timeout).
    """
    tau = env.robot.control_period
    acc_lim = acc_limit_vector(env.robot)
    t = 0.0
    done = env.done
    while not done:
        s = env.state
        q_ref, qd_ref = traj.sample(t + tau)
        v = qd_ref + kp * wrap_diff(s.config, q_ref)
        c, si = math.cos(s.theta), math.sin(s.theta)
        v_body = np.array([c * v[0] + si * v[1], -si * v[0] + c * v[1], v[2], v[3], v[4]])
        _, _, done, _ = env.step(nearest_action((v_body - s.velocities) / tau, acc_lim))
        t += tau
    result = env.result
    logger.debug(f"executed {traj.duration:.2f} s trajectory: {result.outcome.value} after {result.steps * tau:.2f} s")
    return result
