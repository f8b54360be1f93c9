"""End-effector reference path: grid A* with line-of-sight shortcutting, plus progress/deviation queries"""
import heapq
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from src.errors import NoPath
from src.sim.geometry import points_clearance, segment_distances
from src.sim.world import WorldModel

logger = logging.getLogger(__name__)

DEFAULT_CELL = 0.05
DEFAULT_INFLATION = 0.10
# Tie tolerance when several segments are equally near
TIE_TOL = 1e-12
_MOVES = [(-1, 0, 1.0), (1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0)] + \
         [(dy, dx, math.sqrt(2.0)) for dy in (-1, 1) for dx in (-1, 1)]


@dataclass(frozen=True, eq=False)
class RefPath:
    waypoints: np.ndarray   # (n, 2)
    cum_length: np.ndarray  # (n,), cum_length[0] == 0

    @classmethod
    def from_waypoints(cls, pts) -> "RefPath":
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        keep = [0] + [i for i in range(1, len(pts)) if np.hypot(*(pts[i] - pts[i - 1])) > 1e-12]
        pts = pts[keep]
        if len(pts) < 2:
            raise NoPath("reference path has zero length")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        return cls(waypoints=pts, cum_length=np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def total_length(self) -> float:
        return float(self.cum_length[-1])

    def point_at(self, s: float) -> np.ndarray:
        s = min(max(s, 0.0), self.total_length)
        i = int(np.clip(np.searchsorted(self.cum_length, s, side="right") - 1, 0, len(self.waypoints) - 2))
        seg = self.cum_length[i + 1] - self.cum_length[i]
        t = (s - self.cum_length[i]) / seg
        return self.waypoints[i] + t * (self.waypoints[i + 1] - self.waypoints[i])

    def to_json(self) -> list[list[float]]:
        return self.waypoints.tolist()


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    x0: float
    y0: float
    cell: float
    free: np.ndarray  # (ny, nx), indexed [row=y, col=x]

    def to_cell(self, p) -> tuple[int, int]:
        return (int(math.floor((p[1] - self.y0) / self.cell)), int(math.floor((p[0] - self.x0) / self.cell)))

    def center(self, r: int, c: int) -> tuple[float, float]:
        return (self.x0 + (c + 0.5) * self.cell, self.y0 + (r + 0.5) * self.cell)

    def is_free(self, r: int, c: int) -> bool:
        ny, nx = self.free.shape
        return 0 <= r < ny and 0 <= c < nx and bool(self.free[r, c])


@lru_cache(maxsize=16)
def occupancy_grid(world: WorldModel, inflation: float, cell: float = DEFAULT_CELL) -> OccupancyGrid:
    """Cells whose center keeps `inflation` clearance from every obstacle are free."""
    b = world.bounds
    nx = max(1, int(math.ceil((b.xmax - b.xmin) / cell)))
    ny = max(1, int(math.ceil((b.ymax - b.ymin) / cell)))
    xs = b.xmin + (np.arange(nx) + 0.5) * cell
    ys = b.ymin + (np.arange(ny) + 0.5) * cell
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    clearance = np.concatenate([points_clearance(chunk, world.arrays) for chunk in np.array_split(pts, max(1, len(pts) // 8192))])
    return OccupancyGrid(b.xmin, b.ymin, cell, (clearance >= inflation).reshape(ny, nx))


def _nearest_free(grid: OccupancyGrid, p) -> tuple[int, int]:
    r, c = grid.to_cell(p)
    if grid.is_free(r, c):
        return (r, c)
    candidates = [(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if grid.is_free(r + dr, c + dc)]
    if not candidates:
        raise NoPath(f"no free cell near {tuple(p)}")
    return min(candidates, key=lambda rc: math.dist(grid.center(*rc), p))


def astar(grid: OccupancyGrid, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]]:
    """8-connected A* without corner cutting; octile heuristic."""
    def h(n):
        dy, dx = abs(n[0] - goal[0]), abs(n[1] - goal[1])
        return max(dy, dx) + (math.sqrt(2.0) - 1.0) * min(dy, dx)

    g = {start: 0.0}
    parent = {start: None}
    queue = [(h(start), 0, start)]
    counter = 0
    closed = set()
    while queue:
        _, _, cur = heapq.heappop(queue)
        if cur in closed:
            continue
        if cur == goal:
            path = []
            while cur is not None:
                path.append(cur)
                cur = parent[cur]
            return path[::-1]
        closed.add(cur)
        for dr, dc, cost in _MOVES:
            nxt = (cur[0] + dr, cur[1] + dc)
            if nxt in closed or not grid.is_free(*nxt):
                continue
            if dr and dc and not (grid.is_free(cur[0] + dr, cur[1]) and grid.is_free(cur[0], cur[1] + dc)):
                continue
            ng = g[cur] + cost
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = cur
                counter += 1
                heapq.heappush(queue, (ng + h(nxt), counter, nxt))
    raise NoPath(f"grid search exhausted from {start} to {goal}")


def shortcut(world: WorldModel, pts: np.ndarray, inflation: float) -> np.ndarray:
    """Greedy line-of-sight: from each kept point jump to the farthest visible later point."""
    edges = world.arrays.edges
    if len(edges) == 0:
        return pts[[0, -1]]
    out = [pts[0]]
    i, n = 0, len(pts)
    while i < n - 1:
        later = pts[i + 1:]
        start = np.repeat(pts[i][None, :], len(later), axis=0)
        clearance = segment_distances(start, later, edges[:, 0], edges[:, 1]).min(axis=1)
        visible = np.nonzero(clearance >= inflation - 1e-9)[0]
        j = i + 1 + (int(visible.max()) if len(visible) else 0)
        out.append(pts[j])
        i = j
    return np.array(out)


def plan_ee_path(world: WorldModel, start, goal, inflation: float = DEFAULT_INFLATION,
                 cell: float = DEFAULT_CELL) -> RefPath:
    """Collision-free end-effector polyline from start to goal with obstacles inflated."""
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    grid = occupancy_grid(world, float(inflation), float(cell))
    cells = astar(grid, _nearest_free(grid, start), _nearest_free(grid, goal))
    centers = np.array([grid.center(r, c) for r, c in cells])
    pts = np.concatenate([start[None, :], centers, goal[None, :]])
    path = RefPath.from_waypoints(shortcut(world, pts, inflation))
    logger.debug(f"reference path: {len(cells)} cells -> {len(path.waypoints)} waypoints, {path.total_length:.2f} m")
    return path


def project(path: RefPath, pt) -> tuple[float, float]:
    """Arc length s and deviation d of the nearest polyline point; ties go to the larger s."""
    p = np.asarray(pt, dtype=np.float64)
    a = path.waypoints[:-1]
    ab = path.waypoints[1:] - a
    seg = np.diff(path.cum_length)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / (seg * seg), 0.0, 1.0)
    d = np.hypot(*(a + t[:, None] * ab - p).T)
    s = path.cum_length[:-1] + t * seg
    dmin = float(d.min())
    return float(s[d <= dmin + TIE_TOL].max()), dmin
