"""Evaluation metrics: per-run rows, method/task summaries, trace distances, curve smoothing"""
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from src.models import RobotState

# Averaged over successful runs only; success rate uses every run.
SUCCESS_ONLY_METRICS = ("total_time", "planning_time", "execution_time", "base_distance", "joint_distance")


@dataclass
class MetricsRow:
    method: str
    task: int
    run: int
    seed: int
    success: bool
    outcome: str
    total_time: float
    planning_time: float
    execution_time: float
    base_distance: float
    joint_distance: float

    def __post_init__(self):
        if min(self.base_distance, self.joint_distance, self.planning_time, self.execution_time) < 0:
            raise ValueError("metrics must be nonnegative")

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def to_dict(self) -> dict:
        return asdict(self)


def rows_frame(rows: Iterable[MetricsRow] | pd.DataFrame) -> pd.DataFrame:
    if isinstance(rows, pd.DataFrame):
        return rows
    return pd.DataFrame([r.to_dict() for r in rows], columns=MetricsRow.columns())


def _summarize_group(df: pd.DataFrame) -> dict:
    ok = df[df["success"].astype(bool)]
    out = {"n_runs": len(df), "n_success": len(ok), "success_rate": float(df["success"].astype(bool).mean())}
    for name in SUCCESS_ONLY_METRICS:
        values = ok[name].astype(float)
        out[f"{name}_mean"] = float(values.mean()) if len(values) else math.nan
        out[f"{name}_std"] = float(values.std(ddof=0)) if len(values) else math.nan
    return out


def summarize(rows: Iterable[MetricsRow] | pd.DataFrame) -> pd.DataFrame:
    """
    One row per (method, task) plus an "all" row per method.

    Times and distances are mean/std (population) over successful runs; success_rate over all runs.
    """
    df = rows_frame(rows)
    if df.empty:
        raise ValueError("no rows to summarize")
    records = []
    for method, by_method in df.groupby("method", sort=True):
        for task, group in by_method.groupby("task", sort=True):
            records.append({"method": method, "task": str(task), **_summarize_group(group)})
        records.append({"method": method, "task": "all", **_summarize_group(by_method)})
    return pd.DataFrame(records)


def format_summary(summary: pd.DataFrame) -> str:
    """Human-readable table, mean (std) per metric."""
    lines = [f"{'method':<10}{'task':<6}{'success':>9}" + "".join(f"{m:>22}" for m in SUCCESS_ONLY_METRICS)]
    for _, r in summary.iterrows():
        cells = "".join(f"{r[m + '_mean']:>12.2f} ({r[m + '_std']:>6.2f})" for m in SUCCESS_ONLY_METRICS)
        lines.append(f"{r['method']:<10}{r['task']:<6}{r['success_rate']:>9.2f}{cells}")
    lines.append("times/distances: successful runs only; success rate: all runs")
    return "\n".join(lines)


def _as_state(s) -> RobotState:
    if isinstance(s, RobotState):
        return s
    return RobotState(**{k: float(s[k]) for k in ("x", "y", "theta", "phi1", "phi2") if k in s})


def base_joint_distances(states: Sequence) -> tuple[float, float]:
    """Summed base displacement [m] and summed |dphi| over both joints [rad] along a state sequence."""
    if len(states) == 0:
        raise ValueError("trace is empty")
    arr = np.array([[s.x, s.y, s.phi1, s.phi2] for s in map(_as_state, states)])
    step = np.diff(arr, axis=0)
    base = float(np.hypot(step[:, 0], step[:, 1]).sum())
    joint = float(np.abs(step[:, 2:]).sum())
    return base, joint


def trace_states(header: dict | None, steps: list[dict]) -> list[dict]:
    """States of a recorded episode, the initial one included."""
    states = [header["state"]] if header and "state" in header else []
    return states + [s["state"] for s in steps if "state" in s]


def smooth(values, alpha: float = 0.1) -> np.ndarray:
    """Exponential moving average for training curves."""
    series = pd.Series(np.asarray(values, dtype=np.float64))
    return series.ewm(alpha=alpha, adjust=False).mean().to_numpy()
