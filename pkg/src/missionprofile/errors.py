"""Exception types shared across the package."""


class MissionProfileError(Exception):
    """Base class for all package errors."""


class DomainError(MissionProfileError, ValueError):
    """An argument lies outside the domain of the operation."""


class RankDeficiencyError(MissionProfileError, ValueError):
    """The penalized least-squares system is singular."""


class DegenerateScaleError(MissionProfileError, ValueError):
    """A sample has zero spread where a scale estimate is needed."""


class DegenerateCrossSectionError(DegenerateScaleError):
    """Too many projection directions are degenerate at one grid time."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class BasisMismatchError(MissionProfileError, ValueError):
    """Functional objects live on different basis systems."""


class InvariantViolation(MissionProfileError, RuntimeError):
    """An internal consistency check failed before output was written."""


class DegenerateScaleWarning(UserWarning):
    """Emitted when a robust scale is zero and a default is used instead."""
