import numpy as np
import pytest
import torch

from src.errors import WorkerError
from src.models import Action
from src.rl.policy import forward, init_params, logprob_entropy
from src.rl.rollout import LocalPool, ProcessPool, RolloutWorker, collect_rollouts, make_pool


@pytest.fixture
def params(cfg):
    return init_params(cfg, seed=0)


def test_buffer_shape(cfg, params):
    pool = LocalPool(cfg, n_workers=2, seed=0)
    buf = collect_rollouts(pool, params, 4)
    assert len(buf) == 8
    assert buf.obs.shape == (2, 4, 137)
    assert buf.actions.shape == (2, 4, 5)
    assert buf.bootstrap.shape == (2,)
    pool.close()


def test_fixed_seed_identical(cfg, params):
    a = collect_rollouts(LocalPool(cfg, 2, seed=5), params, 6)
    b = collect_rollouts(LocalPool(cfg, 2, seed=5), params, 6)
    for name in ("obs", "actions", "logprobs", "values", "rewards", "dones", "bootstrap"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name), err_msg=name)


def test_workers_see_different_scenes(cfg, params):
    buf = collect_rollouts(LocalPool(cfg, 2, seed=5), params, 1)
    assert not np.array_equal(buf.obs[0, 0], buf.obs[1, 0])


def test_logprobs_recompute(cfg, params):
    buf = collect_rollouts(LocalPool(cfg, 2, seed=1), params, 5)
    for w in range(2):
        for t in range(5):
            logits, value = forward(params, buf.obs[w, t])
            lp, _ = logprob_entropy(logits, Action(tuple(buf.actions[w, t])))
            assert lp == pytest.approx(buf.logprobs[w, t], abs=1e-6)
            assert value == pytest.approx(buf.values[w, t], abs=1e-6)


def test_episode_continues_across_batches(cfg, params):
    worker = RolloutWorker(cfg, worker_id=0, seed=2)
    first = worker.run(params, 3)
    second = worker.run(params, 3)
    if not first.episodes and not second.episodes:
        assert worker.env.result.steps == 6


def test_single_worker_runs_in_process(cfg):
    assert isinstance(make_pool(cfg, 1, seed=0), LocalPool)


@pytest.mark.slow
def test_process_pool_matches_local(cfg, params):
    pool = ProcessPool(cfg, 2, seed=3)
    try:
        remote = collect_rollouts(pool, params, 4)
    finally:
        pool.close()
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        local = collect_rollouts(LocalPool(cfg, 2, seed=3), params, 4)
    finally:
        torch.set_num_threads(threads)
    np.testing.assert_array_equal(remote.actions, local.actions)
    np.testing.assert_allclose(remote.rewards, local.rewards)
    np.testing.assert_allclose(remote.obs, local.obs)


def test_rng_states_round_trip(cfg, params):
    pool = LocalPool(cfg, 2, seed=4)
    saved = pool.rng_states()
    first = collect_rollouts(pool, params, 3)
    other = LocalPool(cfg, 2, seed=99)
    other.set_rng_states(saved)
    assert other.rng_states() == saved
    assert other.rng_states() != pool.rng_states()
    np.testing.assert_array_equal(collect_rollouts(other, params, 3).actions, first.actions)


@pytest.mark.slow
def test_dead_worker_raises(cfg, params):
    pool = ProcessPool(cfg, 2, seed=0)
    try:
        pool.procs[1].terminate()
        pool.procs[1].join(timeout=5)
        with pytest.raises(WorkerError):
            collect_rollouts(pool, params, 2)
    finally:
        pool.close()
