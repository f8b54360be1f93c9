import pytest

from src.config import AdrConfig
from src.models import EpisodeResult, Outcome
from src.rl.adr import AdrState, adr_update


def _feed(adr: AdrState, successes: int, total: int) -> AdrState:
    for i in range(total):
        adr = adr_update(adr, i < successes)
    return adr


@pytest.fixture
def adr() -> AdrState:
    return AdrState.from_config(AdrConfig())


def test_starts_at_max(adr):
    assert adr.d_h == 0.5
    assert adr.outcomes == ()


def test_threshold_met_shrinks_tolerance(adr):
    adr = _feed(adr, 70, 100)
    assert adr.d_h == pytest.approx(0.45)
    assert adr.outcomes == ()


def test_below_threshold_unchanged(adr):
    adr = _feed(adr, 50, 100)
    assert adr.d_h == 0.5
    assert len(adr.outcomes) == 100


def test_window_slides(adr):
    adr = _feed(adr, 0, 100)
    adr = _feed(adr, 70, 70)
    # the last 100 hold 70 successes
    assert adr.d_h == pytest.approx(0.45)


def test_accepts_episode_results(adr):
    for _ in range(100):
        adr = adr_update(adr, EpisodeResult(outcome=Outcome.HOLD_SUCCESS))
    assert adr.d_h == pytest.approx(0.45)
    adr = adr_update(adr, EpisodeResult(outcome=Outcome.COLLISION))
    assert adr.outcomes == (False,)


def test_reaches_floor_after_nineteen_windows(adr):
    for window in range(1, 20):
        adr = _feed(adr, 100, 100)
        if window == 18:
            assert adr.d_h > adr.d_h_min
    assert adr.d_h == adr.d_h_min
    assert _feed(adr, 100, 100).d_h == adr.d_h_min


def test_monotone_and_bounded(adr, rng):
    prev = adr.d_h
    for _ in range(5000):
        adr = adr_update(adr, bool(rng.random() < 0.8))
        assert adr.d_h_min <= adr.d_h <= prev
        prev = adr.d_h


def test_restore_round_trip(adr):
    adr = _feed(adr, 100, 100)
    adr = _feed(adr, 3, 10)
    restored = AdrState.from_config(AdrConfig()).restore(adr.to_dict())
    assert restored == adr


def test_out_of_bounds_rejected():
    with pytest.raises(ValueError):
        AdrState(d_h=0.6, d_h_min=0.07, d_h_max=0.5)
