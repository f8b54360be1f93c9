"""
Actor-critic network over two lidar scans and proprioception.

Scan branch (shared by front and rear scans):
    conv -> pool -> conv -> pool -> dense
Fusion of both scan features, then proprioceptive concat and a deep dense body,
split into a 5x5 categorical actor head and a scalar critic head.
"""
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
import torch
import torch.nn as nn
from torch.func import functional_call

from src.config import AppConfig, NetworkSpec
from src.errors import GradientError, ParamsCorrupt
from src.models import Action, N_BINS, N_BLOCKS, Observation

logger = logging.getLogger(__name__)

PARAMS_VERSION = 1


def _conv_out(n: int, kernel: int, stride: int) -> int:
    return (n - kernel) // stride + 1


class WbcNetwork(nn.Module):
    def __init__(self, spec: NetworkSpec, n_beams: int):
        super().__init__()
        self.spec = spec
        self.n_beams = n_beams
        (k1, s1, c1), (k2, s2, c2) = spec.conv1, spec.conv2
        n = _conv_out(n_beams, k1, s1) // spec.pool
        n = _conv_out(n, k2, s2) // spec.pool
        if n < 1:
            raise ValueError(f"{n_beams} beams too few for the scan branch")
        self.scan_conv1 = nn.Conv1d(1, c1, k1, s1)
        self.scan_conv2 = nn.Conv1d(c1, c2, k2, s2)
        self.scan_pool = nn.MaxPool1d(spec.pool)
        self.scan_dense = nn.Linear(c2 * n, spec.scan_features)

        widths = [2 * spec.scan_features, *spec.fusion_widths]
        self.fusion = nn.ModuleList(nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:]))
        widths = [spec.fusion_widths[-1] + spec.proprio_dim, *spec.body_widths]
        self.body = nn.ModuleList(nn.Linear(a, b) for a, b in zip(widths[:-1], widths[1:]))
        self.actor = nn.Linear(widths[-1], spec.n_blocks * spec.n_bins)
        self.critic = nn.Linear(widths[-1], 1)
        self.act = nn.LeakyReLU(spec.leaky_slope)

    @property
    def obs_dim(self) -> int:
        return 2 * self.n_beams + self.spec.proprio_dim

    def encode_scan(self, scan: torch.Tensor) -> torch.Tensor:
        """(B, n_beams) -> (B, scan_features)"""
        h = self.scan_pool(self.act(self.scan_conv1(scan.unsqueeze(1))))
        h = self.scan_pool(self.act(self.scan_conv2(h)))
        return self.act(self.scan_dense(h.flatten(1)))

    def forward(self, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        n = self.n_beams
        h = torch.cat([self.encode_scan(obs[:, :n]), self.encode_scan(obs[:, n:2 * n])], dim=1)
        for layer in self.fusion:
            h = self.act(layer(h))
        h = torch.cat([h, obs[:, 2 * n:]], dim=1)
        for layer in self.body:
            h = self.act(layer(h))
        return self.actor(h), self.critic(h).squeeze(-1)


@lru_cache(maxsize=8)
def network_for(spec: NetworkSpec, n_beams: int) -> WbcNetwork:
    """Shared stateless module; parameters always come from PolicyParams."""
    return WbcNetwork(spec, n_beams)


@dataclass
class PolicyParams:
    tensors: "OrderedDict[str, torch.Tensor]"
    spec: NetworkSpec = field(default_factory=NetworkSpec)
    n_beams: int = 64
    version: int = PARAMS_VERSION

    @property
    def network(self) -> WbcNetwork:
        return network_for(self.spec, self.n_beams)

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        return {name: tuple(t.shape) for name, t in self.network.named_parameters()}

    def check(self):
        expected = self.expected_shapes()
        got = {name: tuple(t.shape) for name, t in self.tensors.items()}
        if got != expected:
            missing = sorted(set(expected) - set(got))
            wrong = sorted(k for k in set(expected) & set(got) if expected[k] != got[k])
            raise ParamsCorrupt(f"parameter shapes do not match network: missing={missing} mismatched={wrong}")

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(t).all()) for t in self.tensors.values())

    def numel(self) -> int:
        return sum(t.numel() for t in self.tensors.values())

    def snapshot(self) -> "PolicyParams":
        return PolicyParams(OrderedDict((k, v.detach().clone()) for k, v in self.tensors.items()),
                            self.spec, self.n_beams, self.version)

    def to(self, dtype: torch.dtype) -> "PolicyParams":
        return PolicyParams(OrderedDict((k, v.detach().to(dtype)) for k, v in self.tensors.items()),
                            self.spec, self.n_beams, self.version)

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams(OrderedDict((k, torch.zeros_like(v)) for k, v in self.tensors.items()),
                            self.spec, self.n_beams, self.version)

    def to_numpy(self) -> dict[str, np.ndarray]:
        return {k: v.detach().cpu().numpy() for k, v in self.tensors.items()}

    @classmethod
    def from_numpy(cls, arrays: dict[str, np.ndarray], spec: NetworkSpec, n_beams: int) -> "PolicyParams":
        return cls(OrderedDict((k, torch.from_numpy(np.array(v, dtype=np.float32))) for k, v in arrays.items()),
                   spec, n_beams)


def init_params(cfg: AppConfig, seed: int = 0) -> PolicyParams:
    """Orthogonal weights (gain sqrt(2) hidden, 0.01 actor, 1.0 critic), zero biases."""
    net = network_for(cfg.network, cfg.lidar_front.n_beams)
    tensors = OrderedDict()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        for name, param in net.named_parameters():
            t = torch.empty_like(param, dtype=torch.float32)
            if name.endswith("bias"):
                nn.init.zeros_(t)
            else:
                gain = 0.01 if name.startswith("actor") else 1.0 if name.startswith("critic") else math.sqrt(2.0)
                nn.init.orthogonal_(t, gain=gain)
            tensors[name] = t
    params = PolicyParams(tensors, cfg.network, cfg.lidar_front.n_beams)
    logger.debug(f"initialized policy with {params.numel()} parameters (seed {seed})")
    return params


def _as_batch(obs, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(obs, Observation):
        obs = obs.as_array()
    t = torch.as_tensor(np.asarray(obs) if not isinstance(obs, torch.Tensor) else obs, dtype=dtype)
    return t.unsqueeze(0) if t.dim() == 1 else t


def evaluate(p: PolicyParams, obs: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Differentiable batched forward: (B, obs_dim) -> logits (B, 25), values (B,)."""
    net = p.network
    if obs.shape[-1] != net.obs_dim:
        raise ParamsCorrupt(f"observation width {obs.shape[-1]} != network input {net.obs_dim}")
    try:
        return functional_call(net, p.tensors, (obs,), strict=True)
    except (RuntimeError, KeyError) as e:
        raise ParamsCorrupt(f"parameters incompatible with network: {e}") from e


def forward(p: PolicyParams, obs) -> tuple[np.ndarray, float | np.ndarray]:
    """Inference forward. A single observation gives (25,) logits and a float value."""
    dtype = next(iter(p.tensors.values())).dtype
    batch = _as_batch(obs, dtype)
    with torch.inference_mode():
        logits, values = evaluate(p, batch)
    logits, values = logits.numpy(), values.numpy()
    single = isinstance(obs, Observation) or np.ndim(obs) == 1
    return (logits[0], float(values[0])) if single else (logits, values)


def _log_softmax_blocks(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64).reshape(N_BLOCKS, N_BINS)
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def sample_action(logits, rng: np.random.Generator) -> tuple[Action, float]:
    """Independent categorical sample per block; logprob summed over blocks."""
    logp = _log_softmax_blocks(logits)
    cdf = np.cumsum(np.exp(logp), axis=1)
    u = rng.random(N_BLOCKS) * cdf[:, -1]
    idx = [min(int(np.searchsorted(cdf[b], u[b], side="right")), N_BINS - 1) for b in range(N_BLOCKS)]
    return Action(tuple(idx)), float(sum(logp[b, i] for b, i in enumerate(idx)))


def argmax_action(logits) -> Action:
    """Per-block argmax; ties go to the lowest index."""
    blocks = np.asarray(logits).reshape(N_BLOCKS, N_BINS)
    return Action(tuple(int(i) for i in np.argmax(blocks, axis=1)))


def logprob_entropy(logits, actions) -> tuple:
    """
    Factorized categorical log-probability and entropy.

    Torch inputs: logits (B, 25), actions (B, 5) long -> tensors (B,), (B,), differentiable.
    Otherwise a single logits vector and Action -> floats.
    """
    if not isinstance(logits, torch.Tensor):
        idx = actions.indices if isinstance(actions, Action) else actions
        logp = _log_softmax_blocks(logits)
        lp = float(sum(logp[b, i] for b, i in enumerate(idx)))
        ent = float(-(np.exp(logp) * logp).sum())
        return lp, ent
    logp = torch.log_softmax(logits.reshape(-1, N_BLOCKS, N_BINS), dim=-1)
    lp = logp.gather(-1, actions.long().unsqueeze(-1)).squeeze(-1).sum(-1)
    ent = -(logp.exp() * logp).sum(dim=(-1, -2))
    return lp, ent


LossFn = Callable[[torch.Tensor, torch.Tensor, dict], tuple[torch.Tensor, dict]]


def loss_and_gradients(p: PolicyParams, minibatch: dict, loss_fn: LossFn
                       ) -> tuple[torch.Tensor, dict, "OrderedDict[str, torch.Tensor]"]:
    leaves = OrderedDict((k, v.detach().requires_grad_(True)) for k, v in p.tensors.items())
    dtype = next(iter(leaves.values())).dtype
    logits, values = evaluate(PolicyParams(leaves, p.spec, p.n_beams, p.version), minibatch["obs"].to(dtype))
    loss, stats = loss_fn(logits, values, minibatch)
    if not torch.isfinite(loss):
        raise GradientError(f"non-finite loss {loss.item()} (stats: {({k: float(v) for k, v in stats.items()})})")
    grads = torch.autograd.grad(loss, list(leaves.values()), allow_unused=True)
    out = OrderedDict((k, torch.zeros_like(v) if g is None else g) for (k, v), g in zip(leaves.items(), grads))
    return loss.detach(), stats, out


def gradients(p: PolicyParams, minibatch: dict, loss_fn: LossFn) -> "OrderedDict[str, torch.Tensor]":
    """Exact reverse-mode gradients of loss_fn(logits, values, minibatch) w.r.t. every parameter."""
    return loss_and_gradients(p, minibatch, loss_fn)[2]


def load_policy_file(path, cfg: Optional[AppConfig] = None) -> PolicyParams:
    from src.rl.checkpoint import load

    cfg = cfg or AppConfig()
    return load(path, cfg.network, cfg.lidar_front.n_beams)
