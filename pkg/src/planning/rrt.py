"""Bidirectional RRT (RRT-Connect) over (x_b, y_b, theta_b, phi1, phi2) with greedy shortcutting"""
import logging
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from src.config import BaselineParams, RobotParams
from src.errors import PlanningFailed
from src.models import RobotState
from src.sim.robot import collision_shapes, joint_limits_violated
from src.sim.world import WorldModel, in_collision

logger = logging.getLogger(__name__)

THETA = 2


def wrap_diff(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """b - a with the heading component wrapped to (-pi, pi]."""
    d = np.asarray(b, dtype=np.float64) - np.asarray(a, dtype=np.float64)
    d[..., THETA] = np.pi - (np.pi - d[..., THETA]) % (2 * np.pi)
    return d


@dataclass
class PlanResult:
    path: list[np.ndarray] = field(default_factory=list)
    planning_time: float = 0.0
    attempts_used: int = 0
    success: bool = False
    iterations: int = 0

    def to_json(self) -> dict:
        return {
            "path": [q.tolist() for q in self.path], "planning_time": self.planning_time,
            "attempts_used": self.attempts_used, "success": self.success, "iterations": self.iterations,
        }


class ConfigSpace:
    """Bounds, weighted metric and validity checks for base+arm configurations."""

    def __init__(self, world: WorldModel, robot: RobotParams, epsilon: float = 0.01):
        self.world = world
        self.robot = robot
        self.epsilon = epsilon
        hx, hy = robot.base_half_extents
        self.weights = np.array([1.0, 1.0, math.hypot(hx, hy), robot.reach, robot.reach])
        (lo1, hi1), (lo2, hi2) = robot.joint_pos_limits
        b = world.bounds
        self.lo = np.array([b.xmin, b.ymin, -math.pi, lo1, lo2])
        self.hi = np.array([b.xmax, b.ymax, math.pi, hi1, hi2])

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(wrap_diff(a, b) * self.weights))

    def distances(self, nodes: np.ndarray, q) -> np.ndarray:
        return np.linalg.norm(wrap_diff(nodes, q[None, :]) * self.weights, axis=1)

    def interpolate(self, a, b, t: float) -> np.ndarray:
        q = np.asarray(a, dtype=np.float64) + t * wrap_diff(a, b)
        q[THETA] = math.pi - (math.pi - q[THETA]) % (2 * math.pi)
        return q

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi)

    def valid(self, q) -> bool:
        if q[0] < self.lo[0] or q[0] > self.hi[0] or q[1] < self.lo[1] or q[1] > self.hi[1]:
            return False
        state = RobotState.from_config(q)
        if joint_limits_violated(state, self.robot):
            return False
        return not in_collision(self.world, collision_shapes(state, self.robot))

    def edge_valid(self, a, b, resolution: Optional[float] = None) -> bool:
        """Densified check at `resolution` metric units; endpoint b included, a assumed valid."""
        n = max(1, math.ceil(self.distance(a, b) / (resolution or self.epsilon)))
        return all(self.valid(self.interpolate(a, b, i / n)) for i in range(1, n + 1))

    def path_length(self, path: Sequence[np.ndarray]) -> float:
        return sum(self.distance(a, b) for a, b in zip(path[:-1], path[1:]))


class _Status(Enum):
    TRAPPED = 0
    ADVANCED = 1
    REACHED = 2


class _Tree:
    def __init__(self, roots: Sequence[np.ndarray], capacity: int):
        self.nodes = np.zeros((capacity + len(roots), 5))
        self.parents = np.full(capacity + len(roots), -1, dtype=np.int64)
        self.size = len(roots)
        self.nodes[:self.size] = np.asarray(roots)

    def add(self, q: np.ndarray, parent: int) -> int:
        if self.size == len(self.nodes):
            self.nodes = np.concatenate([self.nodes, np.zeros_like(self.nodes)])
            self.parents = np.concatenate([self.parents, np.full(len(self.parents), -1, dtype=np.int64)])
        self.nodes[self.size] = q
        self.parents[self.size] = parent
        self.size += 1
        return self.size - 1

    def nearest(self, cs: ConfigSpace, q: np.ndarray) -> int:
        return int(np.argmin(cs.distances(self.nodes[:self.size], q)))

    def branch(self, i: int) -> list[np.ndarray]:
        """Nodes from the root down to i."""
        out = []
        while i >= 0:
            out.append(self.nodes[i].copy())
            i = int(self.parents[i])
        return out[::-1]


def _extend(tree: _Tree, cs: ConfigSpace, q: np.ndarray, eta: float) -> tuple[_Status, int]:
    near = tree.nearest(cs, q)
    qn = tree.nodes[near]
    d = cs.distance(qn, q)
    reached = d <= eta
    new = q.copy() if reached else cs.interpolate(qn, q, eta / d)
    if not cs.edge_valid(qn, new):
        return _Status.TRAPPED, -1
    idx = tree.add(new, near)
    return (_Status.REACHED if reached else _Status.ADVANCED), idx


def _connect(tree: _Tree, cs: ConfigSpace, q: np.ndarray, eta: float) -> tuple[_Status, int]:
    status, idx = _Status.ADVANCED, -1
    while status == _Status.ADVANCED:
        status, idx = _extend(tree, cs, q, eta)
    return status, idx


def shortcut(cs: ConfigSpace, path: list[np.ndarray]) -> list[np.ndarray]:
    """From each kept waypoint jump to the farthest directly reachable one."""
    if len(path) <= 2:
        return list(path)
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not cs.edge_valid(path[i], path[j]):
            j -= 1
        out.append(path[j])
        i = j
    return out


def _attempt(cs: ConfigSpace, start: np.ndarray, goals: list[np.ndarray], params: BaselineParams,
             rng: np.random.Generator, deadline: float) -> tuple[Optional[list[np.ndarray]], int]:
    start_tree = _Tree([start], params.max_iterations)
    goal_tree = _Tree(goals, params.max_iterations)
    ta, tb = start_tree, goal_tree
    for it in range(1, params.max_iterations + 1):
        if time.perf_counter() > deadline:
            return None, it
        q = cs.sample(rng)
        status, ia = _extend(ta, cs, q, params.eta)
        if status != _Status.TRAPPED:
            status, ib = _connect(tb, cs, ta.nodes[ia].copy(), params.eta)
            if status == _Status.REACHED:
                a_branch, b_branch = ta.branch(ia), tb.branch(ib)
                if ta is start_tree:
                    path = a_branch + b_branch[::-1][1:]
                else:
                    path = b_branch + a_branch[::-1][1:]
                return path, it
        ta, tb = tb, ta
    return None, params.max_iterations


def plan_rrt_connect(world: WorldModel, start, goals: Sequence, params: BaselineParams, robot: RobotParams,
                     rng: np.random.Generator) -> PlanResult:
    """Raises PlanningFailed (carrying the PlanResult) when every attempt or the time budget runs out."""
    if not goals:
        raise ValueError("goals must be nonempty")
    cs = ConfigSpace(world, robot, params.epsilon)
    start = np.asarray(start, dtype=np.float64)
    goals = [np.asarray(g, dtype=np.float64) for g in goals]
    result = PlanResult()
    t0 = time.perf_counter()
    if not cs.valid(start):
        raise PlanningFailed("start configuration is in collision or out of bounds", result)
    goals = [g for g in goals if cs.valid(g)]
    if not goals:
        raise PlanningFailed("no valid goal configuration", result)
    deadline = t0 + params.time_budget
    for attempt in range(1, params.attempts + 1):
        result.attempts_used = attempt
        path, iterations = _attempt(cs, start, goals, params, rng, deadline)
        result.iterations += iterations
        if path is not None:
            before = cs.path_length(path)
            result.path = shortcut(cs, path)
            result.success = True
            result.planning_time = time.perf_counter() - t0
            logger.debug(f"RRT-Connect: attempt {attempt}, {len(path)} -> {len(result.path)} waypoints, "
                         f"length {before:.2f} -> {cs.path_length(result.path):.2f}")
            return result
        if time.perf_counter() > deadline:
            break
    result.planning_time = time.perf_counter() - t0
    raise PlanningFailed(f"no collision-free path after {result.attempts_used} attempts "
                         f"({result.planning_time:.1f} s)", result)
