"""Training service - orchestrates rollouts, ADR, PPO updates, logs and checkpoints"""
import json
import logging
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from src.config import AppConfig
from src.rl.adr import AdrState, adr_update
from src.rl.checkpoint import load, save
from src.rl.policy import PolicyParams, init_params
from src.rl.ppo import UpdateStats, make_optimizer, ppo_update
from src.rl.rollout import WorkerPool, collect_rollouts, make_pool
from src.storage.records import CsvAppender

logger = logging.getLogger(__name__)

TRAINING_COLUMNS = [
    "update", "steps", "episodes", "mean_reward", "success_rate", "d_h", "lr", "loss", "policy_loss",
    "value_loss", "entropy", "approx_kl", "clip_fraction", "elapsed_s",
]
STATE_FILE = "trainer_state.json"
OPTIMIZER_FILE = "optimizer.pt"


def checkpoint_name(update: int) -> str:
    return f"ckpt_{update:06d}.wbc"


class Trainer:
    """
    Strict alternation of rollout and update phases. The trainer owns the only mutable
    parameter copy; workers receive snapshots. ADR outcomes are folded in between phases.
    """

    def __init__(self, cfg: AppConfig, out_dir: str | Path, pool: Optional[WorkerPool] = None):
        self.cfg = cfg
        self.tc = cfg.train
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.steps_per_update = self.tc.n_workers * self.tc.n_steps
        self.n_updates = max(1, self.tc.total_steps // self.steps_per_update)
        self.params: PolicyParams = init_params(cfg, self.tc.seed)
        self.optimizer = make_optimizer(self.params, self.tc)
        self.adr = AdrState.from_config(cfg.env.adr)
        self.rng = np.random.default_rng([self.tc.seed, 1])
        self.update = 0
        self.steps = 0
        self.log = CsvAppender(self.out_dir / "training.csv", TRAINING_COLUMNS)
        self._pool = pool
        self.checkpoints: list[Path] = []

    @property
    def pool(self) -> WorkerPool:
        if self._pool is None:
            self._pool = make_pool(self.cfg, self.tc.n_workers, self.tc.seed, self.adr.d_h)
        return self._pool

    def run(self, resume: bool = False) -> dict:
        if resume:
            self.restore()
        self.pool.set_tolerance(self.adr.d_h)
        t0 = time.perf_counter()
        try:
            while self.update < self.n_updates:
                self.step_once(t0)
        finally:
            self.pool.close()
        summary = {
            "updates": self.update, "steps": self.steps, "d_h": self.adr.d_h,
            "checkpoint": str(self.checkpoints[-1]) if self.checkpoints else None,
            "elapsed_s": time.perf_counter() - t0,
        }
        (self.out_dir / "summary.json").write_text(json.dumps(summary, indent=2))
        logger.info(f"Training finished: {self.update} updates, {self.steps} steps, d_h {self.adr.d_h:.3f} m")
        return summary

    def step_once(self, t0: Optional[float] = None) -> UpdateStats:
        t0 = time.perf_counter() if t0 is None else t0
        progress = self.steps / self.tc.total_steps
        buf = collect_rollouts(self.pool, self.params, self.tc.n_steps)

        d_h_before = self.adr.d_h
        for episode in buf.episodes:
            self.adr = adr_update(self.adr, episode)
        if self.adr.d_h != d_h_before:
            self.pool.set_tolerance(self.adr.d_h)

        self.params, stats = ppo_update(self.params, buf, self.tc, progress, self.optimizer, self.rng)
        self.update += 1
        self.steps += len(buf)

        rewards = [ep.reward for ep in buf.episodes]
        self.log.append({
            "update": self.update, "steps": self.steps, "episodes": len(buf.episodes),
            "mean_reward": float(np.mean(rewards)) if rewards else math.nan,
            "success_rate": float(np.mean([ep.success for ep in buf.episodes])) if rewards else math.nan,
            "d_h": d_h_before, "lr": stats.lr, "loss": stats.loss, "policy_loss": stats.policy_loss,
            "value_loss": stats.value_loss, "entropy": stats.entropy, "approx_kl": stats.approx_kl,
            "clip_fraction": stats.clip_fraction, "elapsed_s": time.perf_counter() - t0,
        })
        logger.info(f"update {self.update}/{self.n_updates}: {self.steps} steps, {len(rewards)} episodes, "
                    f"reward {np.mean(rewards) if rewards else float('nan'):.2f}, d_h {self.adr.d_h:.3f}")
        if self.update % self.tc.checkpoint_every == 0 or self.update == self.n_updates:
            self.checkpoint()
        return stats

    def checkpoint(self) -> Path:
        path = save(self.params, self.out_dir / checkpoint_name(self.update))
        if not self.checkpoints or self.checkpoints[-1] != path:
            self.checkpoints.append(path)
        torch.save(self.optimizer.state_dict(), self.out_dir / OPTIMIZER_FILE)
        state = {
            "update": self.update, "steps": self.steps, "checkpoint": path.name,
            "adr": self.adr.to_dict(), "rng": self.rng.bit_generator.state,
            "worker_rng": self.pool.rng_states(),
        }
        (self.out_dir / STATE_FILE).write_text(json.dumps(state))
        logger.info(f"Saved checkpoint {path}")
        return path

    def restore(self):
        """Continue from the last checkpoint in out_dir; fresh start when there is none."""
        state_path = self.out_dir / STATE_FILE
        if not state_path.exists():
            logger.warning(f"No {STATE_FILE} in {self.out_dir}; starting fresh")
            return
        state = json.loads(state_path.read_text())
        self.params = load(self.out_dir / state["checkpoint"], self.cfg.network, self.cfg.lidar_front.n_beams)
        self.optimizer = make_optimizer(self.params, self.tc)
        opt_path = self.out_dir / OPTIMIZER_FILE
        if opt_path.exists():
            self.optimizer.load_state_dict(torch.load(opt_path))
        self.update, self.steps = int(state["update"]), int(state["steps"])
        self.adr = self.adr.restore(state["adr"])
        self.rng.bit_generator.state = state["rng"]
        worker_rng = state.get("worker_rng") or []
        if len(worker_rng) == self.pool.n_workers:
            self.pool.set_rng_states(worker_rng)
        else:
            logger.warning(f"{STATE_FILE} has {len(worker_rng)} worker RNG states for {self.pool.n_workers} workers; "
                           f"workers keep fresh streams")
        self.checkpoints = [self.out_dir / state["checkpoint"]]
        logger.info(f"Resumed at update {self.update} ({self.steps} steps, d_h {self.adr.d_h:.3f})")
