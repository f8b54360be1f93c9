"""Planar geometry primitives and vectorized distance / intersection kernels"""
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

# Shapes closer than this are touching, and touching counts as collision.
CONTACT_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Axis-aligned box obstacle."""
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise ValueError(f"degenerate box {self}")

    @property
    def corners(self) -> np.ndarray:
        return np.array([
            [self.xmin, self.ymin], [self.xmax, self.ymin],
            [self.xmax, self.ymax], [self.xmin, self.ymax],
        ])

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def contains(self, p) -> bool:
        return self.xmin <= p[0] <= self.xmax and self.ymin <= p[1] <= self.ymax


@dataclass(frozen=True)
class Segment:
    """Line segment obstacle (walls, door frames)."""
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def endpoints(self) -> np.ndarray:
        return np.array([[self.x0, self.y0], [self.x1, self.y1]])

    @property
    def length(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)


Primitive = Union[Box, Segment]


@dataclass(frozen=True, eq=False)
class ConvexShape:
    """
    Convex shape as a core point set swept by a disc of `radius`.

    One vertex is a point (or disc), two a segment (capsule), three or more a polygon.
    """
    vertices: np.ndarray
    radius: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        if len(v) >= 3 and _signed_area(v) < 0:
            v = v[::-1].copy()
        object.__setattr__(self, "vertices", v)

    @property
    def edges(self) -> np.ndarray:
        v = self.vertices
        if len(v) == 1:
            return np.stack([v, v], axis=1)
        if len(v) == 2:
            return v[None, :, :]
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Closed point-in-core test; only polygons have an interior."""
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        if len(self.vertices) < 3:
            return np.zeros(len(pts), dtype=bool)
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        cross = _cross(b[None, :, :] - a[None, :, :], pts[:, None, :] - a[None, :, :])
        return np.all(cross >= -CONTACT_TOL, axis=1)


def point_shape(p, radius: float = 0.0) -> ConvexShape:
    return ConvexShape(np.asarray(p, dtype=np.float64)[None, :], radius)


def capsule(a, b, radius: float) -> ConvexShape:
    return ConvexShape(np.array([a, b], dtype=np.float64), radius)


def oriented_rect(center, half_extents, yaw: float) -> ConvexShape:
    hx, hy = half_extents
    c, s = math.cos(yaw), math.sin(yaw)
    local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    rot = np.array([[c, -s], [s, c]])
    return ConvexShape(local @ rot.T + np.asarray(center, dtype=np.float64))


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def point_segment_distances(pts: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distances (n, m) from n points to m segments [a, b]."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    ap = pts[:, None, :] - a[None, :, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom > 0, np.einsum("nmj,mj->nm", ap, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.hypot(*(pts[:, None, :] - closest).transpose(2, 0, 1))


def segment_distances(p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray) -> np.ndarray:
    """Distances (n, m) between segments [p0, p1] and [q0, q1]; 0 where they cross."""
    d = np.minimum(
        np.minimum(point_segment_distances(p0, q0, q1), point_segment_distances(p1, q0, q1)),
        np.minimum(point_segment_distances(q0, p0, p1).T, point_segment_distances(q1, p0, p1).T),
    )
    r = p1 - p0
    s = q1 - q0
    d1 = _cross(s[None, :, :], p0[:, None, :] - q0[None, :, :])
    d2 = _cross(s[None, :, :], p1[:, None, :] - q0[None, :, :])
    d3 = _cross(r[:, None, :], q0[None, :, :] - p0[:, None, :])
    d4 = _cross(r[:, None, :], q1[None, :, :] - p0[:, None, :])
    crossing = (d1 * d2 < 0) & (d3 * d4 < 0)
    return np.where(crossing, 0.0, d)


def points_in_boxes(pts: np.ndarray, boxes: np.ndarray) -> np.ndarray:
    """Closed membership (n, b) of points in boxes given as rows (xmin, ymin, xmax, ymax)."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    x = pts[:, 0:1]
    y = pts[:, 1:2]
    return (x >= boxes[None, :, 0]) & (x <= boxes[None, :, 2]) & (y >= boxes[None, :, 1]) & (y <= boxes[None, :, 3])


@dataclass(frozen=True, eq=False)
class ObstacleArrays:
    """Flattened obstacle geometry for the vectorized kernels."""
    edges: np.ndarray      # (E, 2, 2) all segments plus box edges
    boxes: np.ndarray      # (B, 4)
    vertices: np.ndarray   # (V, 2) segment endpoints and box corners

    @classmethod
    def build(cls, obstacles: Sequence[Primitive]) -> "ObstacleArrays":
        edges, boxes, vertices = [], [], []
        for ob in obstacles:
            if isinstance(ob, Box):
                c = ob.corners
                edges.extend(np.stack([c, np.roll(c, -1, axis=0)], axis=1))
                boxes.append([ob.xmin, ob.ymin, ob.xmax, ob.ymax])
                vertices.extend(c)
            else:
                e = ob.endpoints
                edges.append(e)
                vertices.extend(e)
        return cls(
            edges=np.array(edges, dtype=np.float64).reshape(-1, 2, 2),
            boxes=np.array(boxes, dtype=np.float64).reshape(-1, 4),
            vertices=np.array(vertices, dtype=np.float64).reshape(-1, 2),
        )

    @property
    def empty(self) -> bool:
        return len(self.edges) == 0


def shape_distance(shape: ConvexShape, obs: ObstacleArrays) -> float:
    """Euclidean distance between a convex shape and the obstacle set; 0 on overlap or contact."""
    if obs.empty:
        return math.inf
    core = shape.vertices
    if len(obs.boxes) and points_in_boxes(core, obs.boxes).any():
        return 0.0
    if shape.contains_points(obs.vertices).any():
        return 0.0
    e = shape.edges
    d = float(segment_distances(e[:, 0], e[:, 1], obs.edges[:, 0], obs.edges[:, 1]).min()) - shape.radius
    return 0.0 if d <= CONTACT_TOL else d


def points_clearance(pts: np.ndarray, obs: ObstacleArrays) -> np.ndarray:
    """Clearance of many points to the obstacle set (inf when there are none)."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if obs.empty:
        return np.full(len(pts), math.inf)
    d = point_segment_distances(pts, obs.edges[:, 0], obs.edges[:, 1]).min(axis=1)
    if len(obs.boxes):
        d = np.where(points_in_boxes(pts, obs.boxes).any(axis=1), 0.0, d)
    return np.where(d <= CONTACT_TOL, 0.0, d)


def cast_rays(origin, directions: np.ndarray, max_range: float, obs: ObstacleArrays) -> np.ndarray:
    """Distance along each unit direction to the first obstacle, capped at max_range."""
    origin = np.asarray(origin, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 2)
    out = np.full(len(directions), float(max_range))
    if obs.empty:
        return out
    if len(obs.boxes) and points_in_boxes(origin, obs.boxes).any():
        return np.zeros(len(directions))
    a = obs.edges[:, 0]
    e = obs.edges[:, 1] - a
    w = a - origin
    denom = _cross(directions[:, None, :], e[None, :, :])
    parallel = np.abs(denom) < 1e-15
    safe = np.where(parallel, 1.0, denom)
    t = _cross(w[None, :, :], e[None, :, :]) / safe
    u = _cross(w[None, :, :], directions[:, None, :]) / safe
    hit = (~parallel) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
    t = np.where(hit, t, np.inf)
    return np.minimum(out, t.min(axis=1))
