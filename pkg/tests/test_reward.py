import pytest

from src.config import RewardParams
from src.models import Outcome
from src.rl.reward import StepContext, TERM_NAMES, reward_terms, shaping, step_reward, total

P = RewardParams()


def ctx(**kw) -> StepContext:
    base = dict(delta_deviation=0.0, delta_progress=0.0, path_length=4.0, base_speed=0.0,
                clearance=10.0, goal_distance=2.0, tolerance=0.5, in_sphere=False)
    base.update(kw)
    return StepContext(**base)


class TestShaping:
    def test_zero_distance(self):
        assert shaping(0.0, 0.3) == 1.0

    def test_saturates(self):
        assert shaping(0.3, 0.3) == 0.0
        assert shaping(1.0, 0.3) == 0.0

    def test_midpoint(self):
        assert shaping(0.15, 0.3) == pytest.approx(0.5)

    def test_nonpositive_scale(self):
        with pytest.raises(ValueError):
            shaping(0.1, 0.0)


class TestStepReward:
    def test_idle_step_is_time_penalty(self):
        r, holding = step_reward(ctx(), P)
        assert r == pytest.approx(-0.005)
        assert holding == 0.0

    def test_holding_term_at_goal(self):
        terms, holding = reward_terms(ctx(goal_distance=0.0, in_sphere=True), P)
        assert terms["holding"] == pytest.approx(1.6)
        assert holding == pytest.approx(1.6)

    def test_holding_accumulates(self):
        _, holding = reward_terms(ctx(goal_distance=0.25, in_sphere=True, was_in_sphere=True, holding_prev=3.0), P)
        # (20 + 40 * 0.5) * 0.04 / 1.5
        assert holding == pytest.approx(3.0 + 40.0 * 0.04 / 1.5)

    def test_progress_telescopes_to_weight(self):
        steps = [0.1] * 40
        rewards = [reward_terms(ctx(delta_progress=ds), P)[0]["progress"] for ds in steps]
        assert sum(rewards) == pytest.approx(30.0)

    def test_collision_adds_terminal(self):
        r, _ = step_reward(ctx(termination=Outcome.COLLISION), P)
        assert r == pytest.approx(-0.005 - 60.0)

    def test_joint_limit_and_success_terminals(self):
        assert step_reward(ctx(termination=Outcome.JOINT_LIMIT), P)[0] == pytest.approx(-20.005)
        r, _ = step_reward(ctx(termination=Outcome.HOLD_SUCCESS, in_sphere=True, goal_distance=0.5), P)
        assert r == pytest.approx(-0.005 + 20.0 * 0.04 / 1.5 + 10.0)

    def test_timeout_has_no_terminal_reward(self):
        assert step_reward(ctx(termination=Outcome.TIMEOUT), P)[0] == pytest.approx(-0.005)

    def test_leaving_sphere_revokes_holding(self):
        terms, holding = reward_terms(ctx(was_in_sphere=True, in_sphere=False, holding_prev=4.8), P)
        assert terms["revoke"] == pytest.approx(-4.8)
        assert holding == 0.0
        assert total(terms) == pytest.approx(-0.005 - 4.8)

    def test_deviation_and_safety(self):
        terms, _ = reward_terms(ctx(delta_deviation=0.02, base_speed=0.1, clearance=0.15), P)
        assert terms["deviation"] == pytest.approx(-0.2)
        assert terms["safety"] == pytest.approx(-1.0 * 0.1 * 0.04 * 0.5)

    def test_time_penalty_sums_to_weight_at_timeout(self):
        assert sum(step_reward(ctx(), P)[0] for _ in range(P.timeout_steps)) == pytest.approx(-15.0)

    def test_total_covers_all_terms(self):
        terms, _ = reward_terms(ctx(), P)
        assert set(terms) == set(TERM_NAMES)

    def test_invalid_context(self):
        with pytest.raises(ValueError):
            ctx(path_length=0.0)
        with pytest.raises(ValueError):
            ctx(clearance=-0.1)
