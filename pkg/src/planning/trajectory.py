"""Synchronized trapezoidal time-parameterization of a configuration path"""
import math
from dataclasses import dataclass

import numpy as np

from src.planning.rrt import THETA, wrap_diff


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    delta: np.ndarray      # wrapped displacement
    t0: float
    duration: float
    t_acc: float           # ramp time at each end
    sdd: float             # normalized acceleration [1/s^2]
    sd_peak: float         # normalized cruise rate [1/s]

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Configuration and velocity t seconds into the segment."""
        if self.duration <= 0.0:
            return self.start.copy(), np.zeros(5)
        t = min(max(t, 0.0), self.duration)
        if t < self.t_acc:
            s, sd = 0.5 * self.sdd * t * t, self.sdd * t
        elif t <= self.duration - self.t_acc:
            s, sd = 0.5 * self.sdd * self.t_acc ** 2 + self.sd_peak * (t - self.t_acc), self.sd_peak
        else:
            tt = self.duration - t
            s, sd = 1.0 - 0.5 * self.sdd * tt * tt, self.sdd * tt
        q = self.start + s * self.delta
        q[THETA] = math.pi - (math.pi - q[THETA]) % (2 * math.pi)
        return q, sd * self.delta


@dataclass(frozen=True)
class TimedTrajectory:
    waypoints: np.ndarray   # (n, 5)
    times: np.ndarray       # (n,) waypoint arrival times
    segments: tuple[Segment, ...]

    @property
    def duration(self) -> float:
        return float(self.times[-1]) if len(self.times) else 0.0

    def sample(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Configuration and world-frame velocity at time t; holds the final waypoint after the end."""
        if not self.segments or t >= self.duration:
            return self.waypoints[-1].copy(), np.zeros(5)
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.segments) - 1))
        seg = self.segments[i]
        return seg.at(t - seg.t0)

    def to_json(self) -> dict:
        return {"waypoints": self.waypoints.tolist(), "times": self.times.tolist(), "duration": self.duration}


def _profile(delta: np.ndarray, vel: np.ndarray, acc: np.ndarray) -> tuple[float, float, float, float]:
    """
    (duration, t_acc, sdd, sd_peak) for the normalized coordinate s: 0 -> 1.

    Base translation counts as one dimension whose planar speed and acceleration stay within
    the smaller body-frame x/y limit, so the body-frame components hold for any heading.
    """
    span = np.concatenate([[math.hypot(delta[0], delta[1])], np.abs(delta[2:])])
    vel = np.concatenate([[min(vel[0], vel[1])], vel[2:]])
    acc = np.concatenate([[min(acc[0], acc[1])], acc[2:]])
    moving = span > 1e-12
    if not moving.any():
        return 0.0, 0.0, 0.0, 0.0
    sd_lim = float(np.min(vel[moving] / span[moving]))
    sdd = float(np.min(acc[moving] / span[moving]))
    if sd_lim * sd_lim / sdd >= 1.0:
        t_acc = math.sqrt(1.0 / sdd)
        return 2.0 * t_acc, t_acc, sdd, sdd * t_acc
    return 1.0 / sd_lim + sd_lim / sdd, sd_lim / sdd, sdd, sd_lim


def time_parameterize(path, vel_limits, acc_limits) -> TimedTrajectory:
    """
    Rest-to-rest trapezoid per segment, all dimensions synchronized so they start and stop
    together; the slowest dimension sets the pace. Limits are per dimension (x, y, theta, phi1, phi2).
    """
    pts = np.asarray(path, dtype=np.float64).reshape(-1, 5)
    vel = np.asarray(vel_limits, dtype=np.float64)
    acc = np.asarray(acc_limits, dtype=np.float64)
    times = [0.0]
    segments = []
    for a, b in zip(pts[:-1], pts[1:]):
        delta = wrap_diff(a, b)
        duration, t_acc, sdd, sd_peak = _profile(delta, vel, acc)
        segments.append(Segment(a.copy(), delta, times[-1], duration, t_acc, sdd, sd_peak))
        times.append(times[-1] + duration)
    return TimedTrajectory(pts, np.array(times), tuple(segments))
