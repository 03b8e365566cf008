"""Exception hierarchy shared by all pipeline stages."""
from __future__ import annotations


class NeckflexError(Exception):
    """Base class for every error raised by this package."""


class BundleError(NeckflexError):
    """A session bundle on disk is missing, malformed or inconsistent."""

    def __init__(self, path, field: str, message: str):
        self.path = str(path)
        self.field = field
        super().__init__(f"{self.path}: {field}: {message}")


class ConfigError(NeckflexError):
    pass


class DegenerateHistogramError(NeckflexError):
    pass


class NoDepthError(NeckflexError):
    pass


class InvalidDepthError(NeckflexError):
    pass


class OutOfFrustumError(NeckflexError):
    pass


class PairingError(NeckflexError):
    """Offset estimation got empty or ambiguous detection lists."""


class FilterDivergenceError(NeckflexError):
    pass


class TrackLostError(NeckflexError):
    def __init__(self, role: str, frame_index: int):
        self.role = role
        self.frame_index = frame_index
        super().__init__(f"track {role} lost at frame {frame_index}")


class MissingRoleError(NeckflexError):
    def __init__(self, roles, message: str | None = None):
        self.roles = tuple(roles)
        super().__init__(message or f"missing marker role(s): {', '.join(self.roles)}")


class UnstableStaticError(NeckflexError):
    pass


class DegenerateAngleError(NeckflexError):
    pass


class StatisticsError(NeckflexError):
    """Zero variance, length mismatch or too-short input to a statistic."""
