"""Parallel rollout collection: persistent per-worker environments driven by a shared policy snapshot"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Protocol

import numpy as np
import torch.multiprocessing as mp

from src.config import AppConfig
from src.errors import WorkerError
from src.models import EpisodeResult
from src.rl.env import WbcEnv
from src.rl.policy import PolicyParams, forward, sample_action
from src.rl.ppo import RolloutBuffer

logger = logging.getLogger(__name__)


@dataclass
class WorkerBatch:
    obs: np.ndarray
    actions: np.ndarray
    logprobs: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    bootstrap: float
    episodes: list[EpisodeResult] = field(default_factory=list)


class RolloutWorker:
    """One environment plus its own RNG; keeps the in-progress episode between batches."""

    def __init__(self, cfg: AppConfig, worker_id: int, seed: int, tolerance: Optional[float] = None):
        self.cfg = cfg
        self.worker_id = worker_id
        self.env = WbcEnv(cfg, tolerance=tolerance)
        self.rng = np.random.default_rng([seed, worker_id])
        self.obs = None

    def set_tolerance(self, d_h: float):
        self.env.set_tolerance(d_h)

    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def set_rng_state(self, state: dict):
        self.rng.bit_generator.state = state

    def _reset(self):
        self.obs = self.env.reset(int(self.rng.integers(2**31))).as_array()

    def run(self, p: PolicyParams, n_steps: int) -> WorkerBatch:
        if self.obs is None:
            self._reset()
        dim = len(self.obs)
        batch = WorkerBatch(
            obs=np.zeros((n_steps, dim), dtype=np.float32), actions=np.zeros((n_steps, 5), dtype=np.int64),
            logprobs=np.zeros(n_steps), values=np.zeros(n_steps), rewards=np.zeros(n_steps),
            dones=np.zeros(n_steps, dtype=bool), bootstrap=0.0,
        )
        for t in range(n_steps):
            logits, value = forward(p, self.obs)
            action, logp = sample_action(logits, self.rng)
            batch.obs[t] = self.obs
            batch.actions[t] = action.indices
            batch.logprobs[t] = logp
            batch.values[t] = value
            obs, reward, done, _ = self.env.step(action)
            batch.rewards[t] = reward
            batch.dones[t] = done
            if done:
                batch.episodes.append(self.env.result)
                self._reset()
            else:
                self.obs = obs.as_array()
        batch.bootstrap = forward(p, self.obs)[1]
        return batch

    def close(self):
        self.env.close()


class WorkerPool(Protocol):
    n_workers: int

    def collect(self, p: PolicyParams, n_steps: int) -> list[WorkerBatch]: ...

    def set_tolerance(self, d_h: float): ...

    def rng_states(self) -> list[dict]: ...

    def set_rng_states(self, states: list[dict]): ...

    def close(self): ...


class LocalPool:
    """Workers stepped sequentially in this process."""

    def __init__(self, cfg: AppConfig, n_workers: int, seed: int, tolerance: Optional[float] = None):
        self.n_workers = n_workers
        self.workers = [RolloutWorker(cfg, i, seed, tolerance) for i in range(n_workers)]

    def collect(self, p: PolicyParams, n_steps: int) -> list[WorkerBatch]:
        return [w.run(p, n_steps) for w in self.workers]

    def set_tolerance(self, d_h: float):
        for w in self.workers:
            w.set_tolerance(d_h)

    def rng_states(self) -> list[dict]:
        return [w.rng_state() for w in self.workers]

    def set_rng_states(self, states: list[dict]):
        for w, state in zip(self.workers, states):
            w.set_rng_state(state)

    def close(self):
        for w in self.workers:
            w.close()


def _worker_main(conn, cfg_json: str, worker_id: int, seed: int, tolerance: Optional[float]):
    import torch

    torch.set_num_threads(1)
    cfg = AppConfig.model_validate_json(cfg_json)
    worker = RolloutWorker(cfg, worker_id, seed, tolerance)
    try:
        while True:
            cmd, payload = conn.recv()
            if cmd == "collect":
                arrays, n_steps = payload
                p = PolicyParams.from_numpy(arrays, cfg.network, cfg.lidar_front.n_beams)
                try:
                    conn.send(("ok", worker.run(p, n_steps)))
                except Exception as e:
                    conn.send(("error", f"{type(e).__name__}: {e}"))
            elif cmd == "tolerance":
                worker.set_tolerance(payload)
            elif cmd == "get_rng":
                conn.send(worker.rng_state())
            elif cmd == "set_rng":
                worker.set_rng_state(payload)
            elif cmd == "close":
                break
    finally:
        worker.close()
        conn.close()


class ProcessPool:
    """One spawned process per worker, commands over pipes. Same per-worker results as LocalPool."""

    def __init__(self, cfg: AppConfig, n_workers: int, seed: int, tolerance: Optional[float] = None):
        ctx = mp.get_context("spawn")
        self.n_workers = n_workers
        self.conns = []
        self.procs = []
        cfg_json = cfg.model_dump_json()
        for i in range(n_workers):
            parent, child = ctx.Pipe()
            proc = ctx.Process(target=_worker_main, args=(child, cfg_json, i, seed, tolerance), daemon=True)
            proc.start()
            child.close()
            self.conns.append(parent)
            self.procs.append(proc)
        logger.info(f"started {n_workers} rollout worker processes")

    def collect(self, p: PolicyParams, n_steps: int) -> list[WorkerBatch]:
        arrays = p.to_numpy()
        for i, conn in enumerate(self.conns):
            try:
                conn.send(("collect", (arrays, n_steps)))
            except OSError as e:
                raise WorkerError(f"rollout worker {i} is gone: {e}") from e
        results = []
        for i, conn in enumerate(self.conns):
            try:
                status, payload = conn.recv()
            except (EOFError, OSError) as e:
                raise WorkerError(f"rollout worker {i} exited: {e}") from e
            if status != "ok":
                raise WorkerError(f"rollout worker {i} failed: {payload}")
            results.append(payload)
        return results

    def set_tolerance(self, d_h: float):
        for conn in self.conns:
            conn.send(("tolerance", d_h))

    def rng_states(self) -> list[dict]:
        for conn in self.conns:
            conn.send(("get_rng", None))
        try:
            return [conn.recv() for conn in self.conns]
        except (EOFError, OSError) as e:
            raise WorkerError(f"rollout worker exited: {e}") from e

    def set_rng_states(self, states: list[dict]):
        for conn, state in zip(self.conns, states):
            conn.send(("set_rng", state))

    def close(self):
        for conn in self.conns:
            try:
                conn.send(("close", None))
            except (BrokenPipeError, OSError):
                pass
        for proc in self.procs:
            proc.join(timeout=5)
            if proc.is_alive():
                proc.terminate()


def make_pool(cfg: AppConfig, n_workers: int, seed: int, tolerance: Optional[float] = None) -> WorkerPool:
    if n_workers <= 1:
        return LocalPool(cfg, n_workers, seed, tolerance)
    return ProcessPool(cfg, n_workers, seed, tolerance)


def collect_rollouts(pool: WorkerPool, p: PolicyParams, n_steps: int) -> RolloutBuffer:
    """Every worker advances exactly n_steps on the same parameter snapshot."""
    batches = pool.collect(p.snapshot(), n_steps)
    return RolloutBuffer(
        obs=np.stack([b.obs for b in batches]),
        actions=np.stack([b.actions for b in batches]),
        logprobs=np.stack([b.logprobs for b in batches]),
        values=np.stack([b.values for b in batches]),
        rewards=np.stack([b.rewards for b in batches]),
        dones=np.stack([b.dones for b in batches]),
        bootstrap=np.array([b.bootstrap for b in batches]),
        episodes=[ep for b in batches for ep in b.episodes],
    )
