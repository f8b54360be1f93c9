"""Randomized corridor worlds and the collision / clearance / ray queries against them"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from src.config import RobotParams, ScenarioSpec
from src.errors import GenerationFailed, NoPath
from src.sim.geometry import (
    Box, ConvexShape, ObstacleArrays, Primitive, Segment, cast_rays, oriented_rect, shape_distance,
)

logger = logging.getLogger(__name__)

MAX_GENERATION_ATTEMPTS = 100
# Spawn area and the first shelf-free stretch of corridor
SPAWN_X = 1.2
CLEAR_ZONE_X = 2.5
GOAL_OFFSET = (0.15, 0.40)
WALL_MARGIN = 1.5


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float

    def contains(self, p) -> bool:
        return ((p[0] - self.cx) / self.a) ** 2 + ((p[1] - self.cy) / self.b) ** 2 <= 1.0

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        """Uniform over the area."""
        r = math.sqrt(rng.random())
        t = rng.uniform(-math.pi, math.pi)
        return (self.cx + self.a * r * math.cos(t), self.cy + self.b * r * math.sin(t))


@dataclass(frozen=True)
class OrientedBox:
    cx: float
    cy: float
    hx: float
    hy: float
    yaw: float = 0.0

    @property
    def shape(self) -> ConvexShape:
        return oriented_rect((self.cx, self.cy), (self.hx, self.hy), self.yaw)

    def contains(self, p, tol: float = 1e-12) -> bool:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy = p[0] - self.cx, p[1] - self.cy
        lx, ly = c * dx + s * dy, -s * dx + c * dy
        return abs(lx) <= self.hx + tol and abs(ly) <= self.hy + tol

    def sample(self, rng: np.random.Generator) -> tuple[float, float]:
        lx = rng.uniform(-self.hx, self.hx)
        ly = rng.uniform(-self.hy, self.hy)
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return (self.cx + c * lx - s * ly, self.cy + s * lx + c * ly)


@dataclass(frozen=True)
class WorldModel:
    """Static obstacle set plus the regions an episode samples from. Immutable."""
    obstacles: tuple[Primitive, ...]
    corridor_axis: tuple[float, float, float, float]  # origin x, y, direction x, y
    corridor_width: float
    goal_region: OrientedBox
    spawn_region: Ellipse
    bounds: Box
    corridor_length: float = 0.0
    shelf_count: int = 0
    door_count: int = 0

    @cached_property
    def arrays(self) -> ObstacleArrays:
        return ObstacleArrays.build(self.obstacles)


def raycast(world: WorldModel, origin, direction, max_range: float) -> float:
    """Distance to the nearest obstacle along a unit ray, or max_range; 0 from inside an obstacle."""
    return float(cast_rays(origin, np.asarray(direction, dtype=np.float64)[None, :], max_range, world.arrays)[0])


def min_clearance(world: WorldModel, shapes: Sequence[ConvexShape]) -> float:
    """Smallest shape-to-obstacle distance; 0 on overlap, +inf when the world has no obstacles."""
    if not shapes:
        raise ValueError("shapes must be nonempty")
    return min(shape_distance(s, world.arrays) for s in shapes)


def in_collision(world: WorldModel, shapes: Sequence[ConvexShape]) -> bool:
    return min_clearance(world, shapes) == 0.0


# --- JSON layout documents ---

def primitive_to_json(p: Primitive) -> dict:
    if isinstance(p, Box):
        return {"type": "box", "min": [p.xmin, p.ymin], "max": [p.xmax, p.ymax]}
    return {"type": "segment", "start": [p.x0, p.y0], "end": [p.x1, p.y1]}


def primitive_from_json(d: dict) -> Primitive:
    kind = d.get("type")
    if kind == "box":
        return Box(d["min"][0], d["min"][1], d["max"][0], d["max"][1])
    if kind == "segment":
        return Segment(d["start"][0], d["start"][1], d["end"][0], d["end"][1])
    raise ValueError(f"unknown obstacle type: {kind!r}")


def world_to_json(world: WorldModel) -> dict:
    g, s, b = world.goal_region, world.spawn_region, world.bounds
    ox, oy, dx, dy = world.corridor_axis
    return {
        "obstacles": [primitive_to_json(p) for p in world.obstacles],
        "corridor": {"origin": [ox, oy], "direction": [dx, dy],
                     "width": world.corridor_width, "length": world.corridor_length},
        "goal_region": {"center": [g.cx, g.cy], "half_extents": [g.hx, g.hy], "yaw": g.yaw},
        "spawn_region": {"center": [s.cx, s.cy], "semi_axes": [s.a, s.b]},
        "bounds": {"min": [b.xmin, b.ymin], "max": [b.xmax, b.ymax]},
        "shelf_count": world.shelf_count,
        "door_count": world.door_count,
    }


def world_from_json(doc: dict) -> WorldModel:
    """Build a world from a layout document. Missing regions default around the obstacle extent."""
    obstacles = tuple(primitive_from_json(o) for o in doc.get("obstacles", []))
    if "bounds" in doc:
        bounds = Box(*doc["bounds"]["min"], *doc["bounds"]["max"])
    else:
        pts = np.concatenate([ObstacleArrays.build(obstacles).vertices, np.zeros((1, 2))])
        lo, hi = pts.min(axis=0) - 1.0, pts.max(axis=0) + 1.0
        bounds = Box(float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    cy = 0.5 * (bounds.ymin + bounds.ymax)
    corridor = doc.get("corridor", {})
    if "spawn_region" in doc:
        s = doc["spawn_region"]
        spawn = Ellipse(s["center"][0], s["center"][1], s["semi_axes"][0], s["semi_axes"][1])
    else:
        spawn = Ellipse(bounds.xmin + 1.5, cy, 0.3, 0.2)
    if "goal_region" in doc:
        g = doc["goal_region"]
        goal = OrientedBox(g["center"][0], g["center"][1], g["half_extents"][0], g["half_extents"][1], g.get("yaw", 0.0))
    else:
        goal = OrientedBox(bounds.xmax - 1.5, cy, 0.2, 0.2)
    return WorldModel(
        obstacles=obstacles,
        corridor_axis=tuple(corridor.get("origin", [0.0, 0.0])) + tuple(corridor.get("direction", [1.0, 0.0])),
        corridor_width=float(corridor.get("width", bounds.ymax - bounds.ymin)),
        goal_region=goal,
        spawn_region=spawn,
        bounds=bounds,
        corridor_length=float(corridor.get("length", bounds.xmax - bounds.xmin)),
        shelf_count=int(doc.get("shelf_count", 0)),
        door_count=int(doc.get("door_count", 0)),
    )


# --- generation ---

@dataclass
class _Layout:
    length: float
    width: float
    shelves: list[tuple[int, float, float, float]] = field(default_factory=list)  # side, x0, x1, depth
    doors: list[tuple[int, float, float]] = field(default_factory=list)          # side, x0, x1


def _overlaps(spans: list[tuple[int, float, float]], side: int, x0: float, x1: float, gap: float = 0.2) -> bool:
    return any(s == side and x0 < b + gap and a < x1 + gap for s, a, b in spans)


def sample_layout(spec: ScenarioSpec, rng: np.random.Generator) -> Optional[_Layout]:
    """Draw corridor dimensions, shelves and doors; None when placement failed."""
    layout = _Layout(length=float(rng.uniform(*spec.corridor_length_range)),
                     width=float(rng.uniform(*spec.corridor_width_range)))
    L = layout.length
    n_shelves = int(rng.integers(spec.shelf_count_range[0], spec.shelf_count_range[1] + 1))
    n_doors = int(rng.integers(spec.door_count_range[0], spec.door_count_range[1] + 1))
    spans: list[tuple[int, float, float]] = []

    for i in range(n_shelves):
        for _ in range(20):
            side = int(rng.choice([-1, 1]))
            w = float(rng.uniform(*spec.shelf_width_range))
            depth = float(rng.uniform(*spec.shelf_depth_range))
            lo = max(0.5 * L, CLEAR_ZONE_X) if i == 0 else CLEAR_ZONE_X
            hi = L - 0.3 - w
            if hi < lo:
                continue
            x0 = float(rng.uniform(lo, hi))
            if not _overlaps(spans, side, x0, x0 + w):
                spans.append((side, x0, x0 + w))
                layout.shelves.append((side, x0, x0 + w, depth))
                break
        else:
            return None

    for _ in range(n_doors):
        for _ in range(20):
            side = int(rng.choice([-1, 1]))
            w = float(rng.uniform(*spec.door_width_range))
            if L - 1.0 - w < CLEAR_ZONE_X:
                continue
            x0 = float(rng.uniform(CLEAR_ZONE_X, L - 1.0 - w))
            if not _overlaps(spans, side, x0, x0 + w):
                spans.append((side, x0, x0 + w))
                layout.doors.append((side, x0, x0 + w))
                break
        else:
            return None
    return layout


def _build_world(layout: _Layout, spec: ScenarioSpec) -> WorldModel:
    L, half = layout.length, 0.5 * layout.width
    obstacles: list[Primitive] = []
    for side in (-1, 1):
        gaps = sorted((a, b) for s, a, b in layout.doors if s == side)
        x = 0.0
        for a, b in gaps:
            obstacles.append(Segment(x, side * half, a, side * half))
            x = b
        obstacles.append(Segment(x, side * half, L, side * half))
    obstacles.append(Segment(0.0, -half, 0.0, half))
    obstacles.append(Segment(L, -half, L, half))

    shelves = []
    for side, x0, x1, depth in layout.shelves:
        if side > 0:
            shelves.append(Box(x0, half - depth, x1, half))
        else:
            shelves.append(Box(x0, -half, x1, -half + depth))
    obstacles.extend(shelves)

    side, x0, x1, depth = layout.shelves[0]
    face = side * (half - depth)
    near, far = GOAL_OFFSET
    goal = OrientedBox(
        cx=0.5 * (x0 + x1), cy=face - side * 0.5 * (near + far),
        hx=max(0.05, 0.5 * (x1 - x0) - 0.15), hy=0.5 * (far - near),
    )
    spawn = Ellipse(SPAWN_X, 0.0, spec.spawn_semi_axes[0], max(0.02, min(spec.spawn_semi_axes[1], half - 0.55)))
    return WorldModel(
        obstacles=tuple(obstacles),
        corridor_axis=(0.0, 0.0, 1.0, 0.0),
        corridor_width=layout.width,
        goal_region=goal,
        spawn_region=spawn,
        bounds=Box(-1.0, -half - WALL_MARGIN, L + 1.0, half + WALL_MARGIN),
        corridor_length=L,
        shelf_count=len(layout.shelves),
        door_count=len(layout.doors),
    )


def validate_world(world: WorldModel, robot: RobotParams, inflation: float = 0.10) -> bool:
    """Regions inside bounds, a clear spawn pose exists and the goal is reachable by the end-effector."""
    from src.planning.pathref import plan_ee_path
    from src.sim.robot import collision_shapes
    from src.models import RobotState

    b = world.bounds
    s = world.spawn_region
    if not (b.contains((s.cx - s.a, s.cy - s.b)) and b.contains((s.cx + s.a, s.cy + s.b))):
        return False
    if not all(b.contains(p) for p in world.goal_region.shape.vertices):
        return False
    if min_clearance(world, [world.goal_region.shape]) < inflation:
        return False
    probe = RobotState(x=s.cx, y=s.cy)
    if min_clearance(world, collision_shapes(probe, robot)) <= 0.0:
        return False
    try:
        plan_ee_path(world, (s.cx, s.cy), (world.goal_region.cx, world.goal_region.cy), inflation)
    except NoPath:
        return False
    return True


def generate_world(spec: ScenarioSpec, seed: int, robot: Optional[RobotParams] = None,
                   inflation: float = 0.10) -> WorldModel:
    """Deterministic per (spec, seed). Fixed layouts pass through untouched."""
    if spec.fixed_layout is not None:
        return world_from_json(spec.fixed_layout)
    robot = robot or RobotParams()
    for attempt in range(MAX_GENERATION_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        layout = sample_layout(spec, rng)
        if layout is None:
            logger.debug(f"seed {seed} attempt {attempt}: placement failed")
            continue
        world = _build_world(layout, spec)
        if validate_world(world, robot, inflation):
            return world
        logger.debug(f"seed {seed} attempt {attempt}: world rejected")
    raise GenerationFailed(f"no valid world for seed {seed} after {MAX_GENERATION_ATTEMPTS} attempts")
