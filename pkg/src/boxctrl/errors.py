"""Exception types shared across the package."""


class BoxctrlError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BoxctrlError):
    """A scenario file is malformed, has unknown keys, or violates a constraint."""


class UnsupportedMotion(BoxctrlError):
    """The requested wall motion cannot be reduced to a single profile.

    Raised for pure translations (length fixed, center moved): the reduction
    ties both wall parameters to one scalar profile, which cannot move the
    center without also changing the length.
    """


class WallCollision(BoxctrlError):
    """A control drives the box length to zero or below at some time."""


class InfeasibleRamp(BoxctrlError):
    """The requested final offset would close the box during the ramp."""


class NoImprovement(BoxctrlError):
    """Control synthesis stalled: no candidate beat the trivial fidelity floor."""


class BudgetExceeded(BoxctrlError):
    """Escalation schedules were exhausted before the accuracy target was met."""


class DegenerateMatching(BoxctrlError):
    """Eigenvalue-curve tracking hit a crossing it could not disambiguate."""
