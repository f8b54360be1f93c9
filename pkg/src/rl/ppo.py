"""Clipped-surrogate PPO: GAE, minibatch updates, linear learning-rate schedule"""
import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import torch

from src.config import TrainConfig
from src.models import EpisodeResult
from src.rl.policy import PolicyParams, logprob_entropy, loss_and_gradients

logger = logging.getLogger(__name__)

ADV_EPS = 1e-8


def lr_schedule(progress: float, cfg: Optional[TrainConfig] = None) -> float:
    cfg = cfg or TrainConfig()
    progress = min(max(float(progress), 0.0), 1.0)
    return cfg.lr_start * (1.0 - progress) + cfg.lr_end * progress


def compute_gae(rewards, values, dones, bootstrap, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Generalized advantage estimation along axis 0 (time).

    dones[t] marks that the episode ended at step t, so V[t+1] belongs to a new episode.
    bootstrap is V of the observation after the last step. Computed in float64.
    """
    r = np.asarray(rewards, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    d = np.asarray(dones, dtype=np.float64)
    if not r.shape == v.shape == d.shape:
        raise ValueError(f"shape mismatch: rewards {r.shape}, values {v.shape}, dones {d.shape}")
    next_v = np.asarray(bootstrap, dtype=np.float64)
    adv = np.zeros_like(r)
    last = np.zeros_like(next_v)
    for t in range(len(r) - 1, -1, -1):
        live = 1.0 - d[t]
        delta = r[t] + gamma * live * next_v - v[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
        next_v = v[t]
    return adv, adv + v


@dataclass
class RolloutBuffer:
    """Rectangular n_workers x n_steps batch of transitions."""
    obs: np.ndarray          # (W, T, obs_dim) float32
    actions: np.ndarray      # (W, T, 5) int64
    logprobs: np.ndarray     # (W, T)
    values: np.ndarray       # (W, T)
    rewards: np.ndarray      # (W, T)
    dones: np.ndarray        # (W, T) bool
    bootstrap: np.ndarray    # (W,)
    episodes: list[EpisodeResult] = field(default_factory=list)

    def __post_init__(self):
        w, t = self.rewards.shape
        for name in ("obs", "actions", "logprobs", "values", "dones"):
            if getattr(self, name).shape[:2] != (w, t):
                raise ValueError(f"{name} is not {w}x{t}")
        if not np.isfinite(self.rewards).all():
            raise ValueError("non-finite reward in rollout")

    @property
    def n_workers(self) -> int:
        return self.rewards.shape[0]

    @property
    def n_steps(self) -> int:
        return self.rewards.shape[1]

    def __len__(self) -> int:
        return self.rewards.size

    def advantages(self, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
        adv, ret = compute_gae(self.rewards.T, self.values.T, self.dones.T, self.bootstrap, gamma, lam)
        return adv.T, ret.T

    def flat(self, gamma: float, lam: float) -> dict[str, torch.Tensor]:
        adv, ret = self.advantages(gamma, lam)
        n = len(self)
        return {
            "obs": torch.from_numpy(self.obs.reshape(n, -1).astype(np.float32)),
            "actions": torch.from_numpy(self.actions.reshape(n, -1).astype(np.int64)),
            "old_logprobs": torch.from_numpy(self.logprobs.reshape(n).astype(np.float64)),
            "old_values": torch.from_numpy(self.values.reshape(n).astype(np.float64)),
            "advantages": torch.from_numpy(adv.reshape(n)),
            "returns": torch.from_numpy(ret.reshape(n)),
        }


@dataclass
class UpdateStats:
    policy_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    clip_fraction: float = 0.0
    loss: float = 0.0
    lr: float = 0.0
    minibatches: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def normalize_advantages(adv: torch.Tensor) -> torch.Tensor:
    return (adv - adv.mean()) / (adv.std(correction=0) + ADV_EPS)


def ppo_loss(cfg: TrainConfig):
    """Composite loss: clipped surrogate + value MSE - entropy bonus."""
    def loss_fn(logits: torch.Tensor, values: torch.Tensor, batch: dict) -> tuple[torch.Tensor, dict]:
        logp, entropy = logprob_entropy(logits, batch["actions"])
        logp = logp.to(torch.float64)
        values = values.to(torch.float64)
        adv = normalize_advantages(batch["advantages"])
        ratio = torch.exp(logp - batch["old_logprobs"])
        clipped = torch.clamp(ratio, 1.0 - cfg.cliprange, 1.0 + cfg.cliprange)
        policy_loss = -torch.min(ratio * adv, clipped * adv).mean()
        if cfg.cliprange_vf >= 0:
            old = batch["old_values"]
            v_clip = old + torch.clamp(values - old, -cfg.cliprange_vf, cfg.cliprange_vf)
            value_loss = torch.max((values - batch["returns"]) ** 2, (v_clip - batch["returns"]) ** 2).mean()
        else:
            value_loss = ((values - batch["returns"]) ** 2).mean()
        ent = entropy.to(torch.float64).mean()
        loss = policy_loss + cfg.value_coeff * value_loss - cfg.ent_coeff * ent
        with torch.no_grad():
            stats = {
                "policy_loss": policy_loss.item(),
                "value_loss": value_loss.item(),
                "entropy": ent.item(),
                "approx_kl": (batch["old_logprobs"] - logp).mean().item(),
                "clip_fraction": ((ratio - 1.0).abs() > cfg.cliprange).double().mean().item(),
            }
        return loss, stats
    return loss_fn


def make_optimizer(p: PolicyParams, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(list(p.tensors.values()), lr=cfg.lr_start, betas=cfg.adam_betas, eps=cfg.adam_eps)


def ppo_update(p: PolicyParams, buf: RolloutBuffer, cfg: TrainConfig, progress: float,
               optimizer: Optional[torch.optim.Adam] = None,
               rng: Optional[np.random.Generator] = None) -> tuple[PolicyParams, UpdateStats]:
    """
    noptepochs passes over nminibatches shuffled minibatches. Updates p in place.

    Pass the same optimizer across updates to keep Adam moments. Raises GradientError
    on a non-finite loss, leaving p as it was before the failing minibatch.
    """
    optimizer = optimizer or make_optimizer(p, cfg)
    rng = rng or np.random.default_rng(cfg.seed)
    lr = lr_schedule(progress, cfg)
    for group in optimizer.param_groups:
        group["lr"] = lr

    data = buf.flat(cfg.gamma, cfg.lam)
    n = len(buf)
    size = n // cfg.nminibatches
    loss_fn = ppo_loss(cfg)
    params = list(p.tensors.values())
    stats = UpdateStats(lr=lr)
    for epoch in range(cfg.noptepochs):
        order = rng.permutation(n)
        for start in range(0, size * cfg.nminibatches, size):
            idx = torch.from_numpy(order[start:start + size])
            mb = {k: v[idx] for k, v in data.items()}
            loss, mb_stats, grads = loss_and_gradients(p, mb, loss_fn)
            for t, g in zip(params, grads.values()):
                t.grad = g.detach().to(t.dtype)
            torch.nn.utils.clip_grad_norm_(params, cfg.max_grad_norm)
            optimizer.step()
            optimizer.zero_grad(set_to_none=True)
            stats.loss += loss.item()
            for key, value in mb_stats.items():
                setattr(stats, key, getattr(stats, key) + value)
            stats.minibatches += 1
    for key in ("policy_loss", "value_loss", "entropy", "approx_kl", "clip_fraction", "loss"):
        setattr(stats, key, getattr(stats, key) / max(stats.minibatches, 1))
    logger.debug(f"PPO update: loss {stats.loss:.4f}, kl {stats.approx_kl:.5f}, clip {stats.clip_fraction:.3f}, lr {lr:.2e}")
    return p, stats
