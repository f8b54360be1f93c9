"""Automatic domain randomization on the goal tolerance radius d_h"""
import logging
from dataclasses import dataclass, field, replace

from src.config import AdrConfig
from src.models import EpisodeResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdrState:
    d_h: float
    d_h_min: float
    d_h_max: float
    window: int = 100
    threshold: float = 0.7
    decay: float = 0.9
    outcomes: tuple[bool, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.d_h_min <= self.d_h <= self.d_h_max:
            raise ValueError(f"d_h {self.d_h} outside [{self.d_h_min}, {self.d_h_max}]")

    @classmethod
    def from_config(cls, cfg: AdrConfig) -> "AdrState":
        return cls(d_h=cfg.d_h_max, d_h_min=cfg.d_h_min, d_h_max=cfg.d_h_max,
                   window=cfg.window, threshold=cfg.threshold, decay=cfg.decay)

    @property
    def success_rate(self) -> float:
        return sum(self.outcomes) / len(self.outcomes) if self.outcomes else 0.0

    def to_dict(self) -> dict:
        return {"d_h": self.d_h, "outcomes": list(self.outcomes)}

    def restore(self, data: dict) -> "AdrState":
        return replace(self, d_h=float(data["d_h"]), outcomes=tuple(bool(o) for o in data.get("outcomes", [])))


def adr_update(adr: AdrState, outcome: EpisodeResult | bool) -> AdrState:
    """Record one episode; shrink d_h when a full window meets the success threshold."""
    success = outcome if isinstance(outcome, bool) else outcome.success
    outcomes = (adr.outcomes + (bool(success),))[-adr.window:]
    if len(outcomes) == adr.window and sum(outcomes) / adr.window >= adr.threshold:
        d_h = max(adr.d_h_min, adr.decay * adr.d_h)
        if d_h < adr.d_h:
            logger.info(f"ADR: tolerance {adr.d_h:.4f} -> {d_h:.4f} m")
        return replace(adr, d_h=d_h, outcomes=())
    return replace(adr, outcomes=outcomes)
