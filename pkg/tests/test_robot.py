import math

import numpy as np
import pytest

from src.config import RobotParams
from src.models import Action, RobotState
from src.sim.robot import (
    action_to_accels, base_shape, collision_shapes, ee_frame_to_world, forward_kinematics, integrate,
    joint_limits_violated, world_to_ee_frame,
)

# Straight-chain test arm
SIMPLE = RobotParams(arm_mount_offset=(0.2, 0.0), l1=0.3, l2=0.3)


@pytest.fixture
def params() -> RobotParams:
    return RobotParams()


class TestActions:
    def test_center_index_is_zero(self, params):
        np.testing.assert_array_equal(action_to_accels(Action.neutral(), params), np.zeros(5))

    def test_max_base_accel(self, params):
        acc = action_to_accels(Action((4, 2, 2, 2, 2)), params)
        assert acc[0] == pytest.approx(0.15)

    def test_min_joint_accel(self, params):
        acc = action_to_accels(Action((2, 2, 2, 0, 2)), params)
        assert acc[3] == pytest.approx(-0.8)

    def test_half_levels(self, params):
        acc = action_to_accels(Action((3, 1, 3, 2, 3)), params)
        np.testing.assert_allclose(acc, [0.075, -0.075, 0.15, 0.0, 0.4])

    def test_invalid_index_rejected(self):
        with pytest.raises(ValueError):
            Action((0, 1, 2, 3, 5))


class TestIntegrate:
    def test_rest_stays_at_rest(self, params):
        s = RobotState(x=1.0, y=-0.5, theta=0.3, phi1=0.2, phi2=-0.1)
        after = integrate(s, np.zeros(5), params)
        np.testing.assert_allclose(after.config, s.config, atol=1e-15)
        np.testing.assert_array_equal(after.velocities, np.zeros(5))

    def test_velocity_clamped(self, params):
        s = integrate(RobotState(vx=0.1), action_to_accels(Action((4, 2, 2, 2, 2)), params), params)
        assert s.vx == pytest.approx(0.1)

    def test_semi_implicit_euler_step(self, params):
        s = integrate(RobotState(), action_to_accels(Action((4, 2, 2, 2, 2)), params), params)
        assert s.vx == pytest.approx(0.006)
        assert s.x == pytest.approx(2.4e-4)
        assert s.y == 0.0

    def test_motion_along_heading(self, params):
        s = integrate(RobotState(theta=math.pi / 2, vx=0.05), np.zeros(5), params)
        assert s.x == pytest.approx(0.0, abs=1e-15)
        assert s.y == pytest.approx(0.05 * 0.04)

    def test_heading_wrapped(self, params):
        s = integrate(RobotState(theta=math.pi - 1e-4, omega=0.2), np.zeros(5), params)
        assert -math.pi < s.theta <= math.pi
        assert s.theta < 0

    def test_deterministic(self, params):
        rng = np.random.default_rng(0)
        actions = [Action(tuple(rng.integers(0, 5, 5))) for _ in range(200)]

        def run():
            s = RobotState()
            for a in actions:
                s = integrate(s, action_to_accels(a, params), params)
            return s

        assert run() == run()


class TestKinematics:
    def test_straight_chain(self):
        assert forward_kinematics(RobotState(), SIMPLE) == pytest.approx((0.8, 0.0, 0.0))

    def test_first_joint_quarter_turn(self):
        x, y, h = forward_kinematics(RobotState(phi1=math.pi / 2), SIMPLE)
        assert (x, y, h) == pytest.approx((0.2, 0.6, math.pi / 2))

    def test_base_rotated_half_turn(self):
        x, y, h = forward_kinematics(RobotState(theta=math.pi), SIMPLE)
        assert (x, y) == pytest.approx((-0.8, 0.0), abs=1e-12)
        assert abs(h) == pytest.approx(math.pi)

    def test_three_shapes(self, params):
        assert len(collision_shapes(RobotState(x=1.0, phi1=0.4), params)) == 3

    def test_base_corners_axis_aligned(self, params):
        base = collision_shapes(RobotState(), params)[0]
        hx, hy = params.base_half_extents
        expected = {(sx * hx, sy * hy) for sx in (-1, 1) for sy in (-1, 1)}
        got = {(round(float(x), 12), round(float(y), 12)) for x, y in base.vertices}
        assert got == {(round(x, 12), round(y, 12)) for x, y in expected}

    def test_rotated_base_shape(self, params):
        state = RobotState(x=1.0, y=-0.5, theta=math.pi / 2)
        base = base_shape(state, params)
        np.testing.assert_array_equal(base.vertices, collision_shapes(state, params)[0].vertices)
        hx, hy = params.base_half_extents
        np.testing.assert_allclose(base.vertices[:, 0].max() - base.vertices[:, 0].min(), 2 * hy, atol=1e-12)
        np.testing.assert_allclose(base.vertices[:, 1].max() - base.vertices[:, 1].min(), 2 * hx, atol=1e-12)

    def test_link_capsules_follow_arm(self, params):
        upper, lower = collision_shapes(RobotState(), params)[1:]
        assert upper.radius == lower.radius == params.link_radius
        np.testing.assert_allclose(lower.vertices[-1], [0.24 + params.l1 + params.l2, 0.0])


class TestFrames:
    def test_ee_maps_to_origin(self, params):
        s = RobotState(x=0.3, y=-1.0, theta=0.7, phi1=0.5, phi2=-1.1)
        ee = forward_kinematics(s, params)[:2]
        np.testing.assert_allclose(world_to_ee_frame(s, params, ee), [0.0, 0.0], atol=1e-12)

    def test_straight_chain_point_ahead(self):
        np.testing.assert_allclose(world_to_ee_frame(RobotState(), SIMPLE, (1.8, 0.0)), [1.0, 0.0], atol=1e-12)

    def test_round_trip(self, params, rng):
        for _ in range(50):
            s = RobotState(x=rng.uniform(-5, 5), y=rng.uniform(-5, 5), theta=rng.uniform(-3, 3),
                           phi1=rng.uniform(-2, 2), phi2=rng.uniform(-2, 2))
            pt = rng.uniform(-10, 10, 2)
            back = world_to_ee_frame(s, params, ee_frame_to_world(s, params, pt))
            np.testing.assert_allclose(back, pt, atol=1e-12)


class TestJointLimits:
    def test_boundary_is_inside(self, params):
        assert not joint_limits_violated(RobotState(phi1=2.8, phi2=-2.8), params)

    def test_just_outside(self, params):
        assert joint_limits_violated(RobotState(phi1=2.8 + 1e-6), params)

    def test_mid_range(self, params):
        assert not joint_limits_violated(RobotState(phi1=0.1, phi2=-0.3), params)
