"""Exception hierarchy for navmix."""


class NavmixError(Exception):
    """Base class for all navmix errors."""


class InvalidTrajectory(NavmixError):
    """Trajectory violates a structural invariant (empty, non-finite, bad dt)."""


class AlignmentError(NavmixError):
    """Two trajectories were combined without sharing length and tick spacing."""


class NoPath(NavmixError):
    """The grid admits no route between the requested endpoints."""


class InvalidEndpoint(NavmixError):
    """A planning endpoint lies outside the grid or on an occupied cell."""


class NoEvidence(NavmixError):
    """No goals, waypoints, or recent joystick data to plan from."""


class EmptyDistribution(NavmixError):
    """A plan distribution with no components was passed to inference."""


class NonpositiveWeight(NavmixError):
    """A mixture component weight was zero or negative."""


class MissingBandwidth(NavmixError):
    """Fewer coupling bandwidths than hierarchy levels."""


class InstanceTooLarge(NavmixError):
    """Exhaustive enumeration would exceed the joint-state budget."""


class TooShort(NavmixError):
    """Trajectory has too few points for the requested operation."""


class SchemaError(NavmixError):
    """Scenario document fails structural validation.

    `path` points at the offending field, e.g. "config.models.v_max".
    """

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class InvariantViolation(NavmixError):
    """Scenario document is well-formed but semantically invalid."""


class UnknownSession(NavmixError):
    """Gateway request referenced a session id that does not exist."""


class OutOfBounds(NavmixError):
    """Operator event payload falls outside the map or on an obstacle."""


class EmptySet(NavmixError):
    """An aggregate was requested over zero instances."""
