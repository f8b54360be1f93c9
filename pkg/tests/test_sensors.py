import numpy as np
import pytest

from src.config import LidarConfig
from src.models import RobotState
from src.sim.sensors import beam_bearings, raw_ranges, scan_origin, simulate_scan
from src.sim.world import raycast

NOISELESS = LidarConfig(noise_sigma=0.0, dropout_prob=0.0)


def test_empty_world_reads_max_range(empty_world, rng):
    scan = simulate_scan(empty_world, RobotState(), NOISELESS, rng)
    np.testing.assert_array_equal(scan.ranges, np.full(64, 5.0))


def test_noiseless_scan_equals_raycast(open_world, rng):
    s = RobotState(x=3.0, y=0.2, theta=0.4)
    scan = simulate_scan(open_world, s, NOISELESS, rng)
    origin = scan_origin(s, NOISELESS)
    expected = [raycast(open_world, origin, (np.cos(b), np.sin(b)), 5.0) for b in beam_bearings(s, NOISELESS)]
    np.testing.assert_allclose(scan.ranges, expected, atol=1e-12)


def test_full_dropout_saturates(open_world, rng):
    cfg = LidarConfig(dropout_prob=1.0)
    scan = simulate_scan(open_world, RobotState(x=3.0), cfg, rng)
    np.testing.assert_array_equal(scan.ranges, np.full(cfg.n_beams, cfg.max_range))


def test_ranges_within_bounds(open_world, rng):
    cfg = LidarConfig(noise_sigma=0.5)
    for _ in range(20):
        r = simulate_scan(open_world, RobotState(x=3.0, y=1.0), cfg, rng).ranges
        assert r.min() > 0.0 and r.max() <= cfg.max_range


def test_same_rng_same_scan(open_world):
    s = RobotState(x=2.5, theta=-0.2)
    a = simulate_scan(open_world, s, LidarConfig(), np.random.default_rng(5))
    b = simulate_scan(open_world, s, LidarConfig(), np.random.default_rng(5))
    np.testing.assert_array_equal(a.ranges, b.ranges)


def test_rear_mount_looks_backwards():
    rear = LidarConfig(mount=(-0.48, -0.395, np.pi))
    bearings = beam_bearings(RobotState(), rear)
    assert np.mean(np.cos(bearings)) < 0


def _narrow_wall_setup(make_world, n_beams: int, sigma: float, dropout: float):
    # A narrow fan facing a wall 2 m ahead: every beam hits at roughly the same range.
    world = make_world(length=8.0, half_width=3.0, extra=({"type": "segment", "start": [4.5, -3.0], "end": [4.5, 3.0]},))
    cfg = LidarConfig(mount=(0.0, 0.0, 0.0), fov=0.2, n_beams=n_beams, noise_sigma=sigma, dropout_prob=dropout)
    s = RobotState(x=2.5)
    return world, cfg, s


def test_noise_statistics(make_world):
    world, cfg, s = _narrow_wall_setup(make_world, 200_000, 0.01, 0.0)
    raw = raw_ranges(world, s, cfg)
    err = simulate_scan(world, s, cfg, np.random.default_rng(0)).ranges - raw
    assert abs(err.mean()) < 2e-4
    assert err.std() == pytest.approx(0.01, rel=0.03)


def test_dropout_frequency(make_world):
    world, cfg, s = _narrow_wall_setup(make_world, 200_000, 0.0, 0.02)
    ranges = simulate_scan(world, s, cfg, np.random.default_rng(1)).ranges
    assert np.mean(ranges == cfg.max_range) == pytest.approx(0.02, abs=0.002)
