"""Figures: training curves (reward, success rate, tolerance) and episode replay frames"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from src.analysis.metrics import smooth
from src.config import AppConfig
from src.models import RobotState
from src.sim.robot import arm_points, collision_shapes, forward_kinematics
from src.sim.sensors import beam_bearings, scan_origin
from src.sim.world import world_from_json
from src.storage.records import read_trace

logger = logging.getLogger(__name__)

LAYOUT = dict(
    plot_bgcolor="rgba(0,0,0,0)",
    paper_bgcolor="white",
    font=dict(color="#334155"),
    margin=dict(l=40, r=20, t=40, b=30),
)
COLORS = {"reward": "#3b82f6", "success": "#22c55e", "d_h": "#f59e0b", "obstacle": "#64748b",
          "robot": "#1e293b", "scan": "#ef4444", "path": "#8b5cf6", "goal": "#22c55e"}


def training_figure(log: pd.DataFrame, alpha: float = 0.1) -> go.Figure:
    """Episode reward, success rate and d_h over environment steps; raw traces faint, EMA bold."""
    fig = make_subplots(rows=3, cols=1, shared_xaxes=True, vertical_spacing=0.06,
                        subplot_titles=("Accumulated reward per episode", "Success rate", "Tolerance d_h [m]"))
    steps = log["steps"].to_numpy()
    for row, (col, color) in enumerate([("mean_reward", COLORS["reward"]), ("success_rate", COLORS["success"])], 1):
        values = log[col].to_numpy(dtype=float)
        fig.add_trace(go.Scatter(x=steps, y=values, mode="lines", line=dict(color=color, width=1),
                                 opacity=0.3, name=f"{col} (raw)", showlegend=False), row=row, col=1)
        mask = np.isfinite(values)
        fig.add_trace(go.Scatter(x=steps[mask], y=smooth(values[mask], alpha), mode="lines",
                                 line=dict(color=color, width=2.5), name=col), row=row, col=1)
    fig.add_trace(go.Scatter(x=steps, y=log["d_h"], mode="lines", line=dict(color=COLORS["d_h"], width=2.5, shape="hv"),
                             name="d_h"), row=3, col=1)
    fig.update_layout(height=800, width=900, **LAYOUT)
    fig.update_xaxes(title_text="environment steps", row=3, col=1)
    return fig


def save_figure(fig: go.Figure, path: str | Path) -> Path:
    """.html and .json are written directly; anything else goes through kaleido."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".html":
        fig.write_html(path)
    elif path.suffix == ".json":
        fig.write_json(path)
    else:
        fig.write_image(path)
    return path


def _polygon(vertices: np.ndarray) -> tuple[list, list]:
    closed = np.vstack([vertices, vertices[:1]])
    return closed[:, 0].tolist(), closed[:, 1].tolist()


def render_frame(header: dict, step: Optional[dict], cfg: Optional[AppConfig] = None) -> go.Figure:
    """World, robot, scan hits, reference path and goal circle for one trace record."""
    cfg = cfg or AppConfig()
    world = world_from_json(header["world"])
    record = step or header
    state = RobotState(**record["state"])
    fig = go.Figure()

    for ob in header["world"]["obstacles"]:
        if ob["type"] == "box":
            (x0, y0), (x1, y1) = ob["min"], ob["max"]
            fig.add_shape(type="rect", x0=x0, y0=y0, x1=x1, y1=y1, line=dict(width=0),
                          fillcolor=COLORS["obstacle"], opacity=0.7)
        else:
            fig.add_trace(go.Scatter(x=[ob["start"][0], ob["end"][0]], y=[ob["start"][1], ob["end"][1]], mode="lines",
                                     line=dict(color=COLORS["obstacle"], width=3), showlegend=False, hoverinfo="skip"))

    path = np.asarray(header.get("path", []))
    if len(path):
        fig.add_trace(go.Scatter(x=path[:, 0], y=path[:, 1], mode="lines", name="path",
                                 line=dict(color=COLORS["path"], dash="dash")))

    gx, gy = header["goal"]
    d_h = record.get("d_h", header.get("d_h", cfg.eval.tolerance))
    fig.add_shape(type="circle", x0=gx - d_h, y0=gy - d_h, x1=gx + d_h, y1=gy + d_h,
                  line=dict(color=COLORS["goal"], width=2))

    scans = record.get("scans", {})
    for key, lidar in (("front", cfg.lidar_front), ("rear", cfg.lidar_rear)):
        if key not in scans:
            continue
        ranges = np.asarray(scans[key])
        hit = ranges < lidar.max_range
        origin = scan_origin(state, lidar)
        bearings = beam_bearings(state, lidar)
        pts = origin + ranges[:, None] * np.stack([np.cos(bearings), np.sin(bearings)], axis=1)
        fig.add_trace(go.Scatter(x=pts[hit, 0], y=pts[hit, 1], mode="markers", name=f"scan {key}",
                                 marker=dict(color=COLORS["scan"], size=3)))

    base = collision_shapes(state, cfg.robot)[0]
    xs, ys = _polygon(base.vertices)
    fig.add_trace(go.Scatter(x=xs, y=ys, mode="lines", fill="toself", name="base",
                             line=dict(color=COLORS["robot"])))
    mount, elbow, ee = arm_points(state, cfg.robot)
    fig.add_trace(go.Scatter(x=[mount[0], elbow[0], ee[0]], y=[mount[1], elbow[1], ee[1]], mode="lines+markers",
                             name="arm", line=dict(color=COLORS["robot"], width=4)))
    ex, ey, _ = forward_kinematics(state, cfg.robot)
    fig.add_trace(go.Scatter(x=[ex], y=[ey], mode="markers", name="ee", marker=dict(color=COLORS["goal"], size=9)))

    b = world.bounds
    title = f"step {step['step']}" if step else "initial state"
    fig.update_layout(title=title, width=900, height=max(300, int(900 * (b.ymax - b.ymin) / (b.xmax - b.xmin))),
                      xaxis=dict(range=[b.xmin, b.xmax], showgrid=False),
                      yaxis=dict(range=[b.ymin, b.ymax], scaleanchor="x", showgrid=False), **LAYOUT)
    return fig


def replay(trace_path: str | Path, out_dir: str | Path, fmt: str = "png",
           cfg: Optional[AppConfig] = None) -> list[Path]:
    """One image per step record; corrupt lines are skipped by the reader."""
    header, steps = read_trace(trace_path)
    if header is None:
        if steps:
            logger.warning(f"{trace_path} has no header record; nothing to render")
        return []
    out_dir = Path(out_dir)
    frames = []
    for step in steps:
        frames.append(save_figure(render_frame(header, step, cfg), out_dir / f"frame_{step['step']:05d}.{fmt}"))
    logger.info(f"rendered {len(frames)} frames from {trace_path} to {out_dir}")
    return frames
