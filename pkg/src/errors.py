"""Domain errors"""
from typing import Any, Optional


class WbcError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(WbcError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class GenerationFailed(WbcError):
    """World generation could not satisfy the scenario spec."""


class NoPath(WbcError):
    """Reference path search exhausted the grid."""


class ResetFailed(WbcError):
    """No collision-free spawn pose was found."""


class SteppedAfterDone(WbcError):
    pass


class ParamsCorrupt(WbcError):
    """Parameters do not match the network layout."""


class ChecksumError(ParamsCorrupt):
    pass


class GradientError(WbcError):
    pass


class PlanningFailed(WbcError):
    def __init__(self, message: str, result: Any = None):
        super().__init__(message)
        self.result = result


class TraceError(WbcError):
    pass


class WorkerError(WbcError):
    """A rollout worker process died or reported a failure."""
