"""Shared fixtures: default config, hand-built corridor worlds, small training setups"""
import numpy as np
import pytest

from src.config import AppConfig, TrainConfig
from src.models import RobotState
from src.sim.world import WorldModel, world_from_json


def corridor_doc(length: float = 8.0, half_width: float = 1.5, extra: tuple = ()) -> dict:
    """Closed straight corridor along +x with optional extra obstacle records."""
    hw = half_width
    return {
        "obstacles": [
            {"type": "segment", "start": [0.0, hw], "end": [length, hw]},
            {"type": "segment", "start": [0.0, -hw], "end": [length, -hw]},
            {"type": "segment", "start": [0.0, -hw], "end": [0.0, hw]},
            {"type": "segment", "start": [length, -hw], "end": [length, hw]},
            *extra,
        ],
        "corridor": {"origin": [0.0, 0.0], "direction": [1.0, 0.0], "width": 2 * hw, "length": length},
        "goal_region": {"center": [length - 1.5, 0.0], "half_extents": [0.2, 0.2], "yaw": 0.0},
        "spawn_region": {"center": [1.2, 0.0], "semi_axes": [0.3, 0.2]},
        "bounds": {"min": [-1.0, -hw - 1.0], "max": [length + 1.0, hw + 1.0]},
    }


@pytest.fixture
def cfg() -> AppConfig:
    return AppConfig()


@pytest.fixture
def make_world():
    def _make(length: float = 8.0, half_width: float = 1.5, extra: tuple = ()) -> WorldModel:
        return world_from_json(corridor_doc(length, half_width, extra))
    return _make


@pytest.fixture
def open_world(make_world) -> WorldModel:
    return make_world()


@pytest.fixture
def empty_world() -> WorldModel:
    return world_from_json({"obstacles": [], "bounds": {"min": [-1.0, -3.0], "max": [10.0, 3.0]}})


@pytest.fixture
def start_state() -> RobotState:
    """Base at (2, 0) facing +x, arm straight ahead: EE at (2.856, 0) with default params."""
    return RobotState(x=2.0, y=0.0, theta=0.0)


@pytest.fixture
def tiny_train_cfg() -> AppConfig:
    """Two workers, 8 steps each, one cheap PPO epoch."""
    return AppConfig(train=TrainConfig(n_workers=2, n_steps=8, nminibatches=2, noptepochs=1,
                                       total_steps=16, checkpoint_every=1))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
