"""Shaped reward: time, path deviation/progress, safety margin, holding, terminal terms"""
from dataclasses import dataclass

from src.config import RewardParams
from src.models import Outcome

TERM_NAMES = ("time", "deviation", "progress", "safety", "holding", "collision", "joint_limit", "hold_success", "revoke")


@dataclass(frozen=True)
class StepContext:
    delta_deviation: float      # signed change (or absolute value, see deviation_mode) [m]
    delta_progress: float       # arc-length progress this step [m]
    path_length: float          # d_pt_init [m]
    base_speed: float           # |v| of the base, linear part [m/s]
    clearance: float            # d_sm [m]
    goal_distance: float        # d_g [m]
    tolerance: float            # d_h [m]
    in_sphere: bool
    was_in_sphere: bool = False
    termination: Outcome = Outcome.NONE
    holding_prev: float = 0.0   # I_h before this step

    def __post_init__(self):
        if self.path_length <= 0:
            raise ValueError(f"path_length must be positive, got {self.path_length}")
        if min(self.clearance, self.goal_distance, self.tolerance) < 0:
            raise ValueError("distances must be nonnegative")


def shaping(x: float, y: float) -> float:
    """L(x, y) = 1 - min(1, x / y)."""
    if y <= 0:
        raise ValueError(f"shaping scale must be positive, got {y}")
    return 1.0 - min(1.0, x / y)


def reward_terms(ctx: StepContext, p: RewardParams) -> tuple[dict[str, float], float]:
    """Per-term breakdown and the updated holding accumulator I_h."""
    tau = p.tau
    holding = 0.0
    if ctx.in_sphere:
        holding = (p.w_ht + p.w_hd * shaping(ctx.goal_distance, ctx.tolerance)) * tau / p.T_h
    left = ctx.was_in_sphere and not ctx.in_sphere
    terms = {
        "time": p.w_t * tau / p.T_t,
        "deviation": p.w_pd * ctx.delta_deviation,
        "progress": p.w_pt * ctx.delta_progress / ctx.path_length,
        "safety": p.w_sm * ctx.base_speed * tau * shaping(ctx.clearance, p.d_th),
        "holding": holding,
        "collision": p.D_c if ctx.termination == Outcome.COLLISION else 0.0,
        "joint_limit": p.D_l if ctx.termination == Outcome.JOINT_LIMIT else 0.0,
        "hold_success": p.D_h if ctx.termination == Outcome.HOLD_SUCCESS else 0.0,
        "revoke": -ctx.holding_prev if left else 0.0,
    }
    holding_new = ctx.holding_prev + holding if ctx.in_sphere else 0.0
    return terms, holding_new


def total(terms: dict[str, float]) -> float:
    r = 0.0
    for name in TERM_NAMES:
        r += terms[name]
    return r


def step_reward(ctx: StepContext, p: RewardParams) -> tuple[float, float]:
    """Scalar reward and I_h after this step."""
    terms, holding_new = reward_terms(ctx, p)
    return total(terms), holding_new
