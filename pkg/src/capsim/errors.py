"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid discretization, model or run configuration.

    ``problems`` lists every violated constraint when more than one is known.
    """

    def __init__(self, message, problems=None):
        super().__init__(message)
        self.problems = list(problems) if problems else [message]


class AtlasDomainError(ValueError):
    """A parameter point lies outside the overlap a transition map is defined on."""


class DegenerateGeometryError(RuntimeError):
    """Collapsed or self-intersecting surface (non-positive area element)."""


class DegenerateDeformationError(RuntimeError):
    """Membrane inversion or a singular reference frame."""


class OrientationError(RuntimeError):
    """Enclosed volume is negative for the surface."""


class StepSizeUnderflow(RuntimeError):
    """Adaptive time step shrank below the allowed minimum."""

    def __init__(self, message, t=None, dt=None, state=None):
        super().__init__(message)
        self.t = t
        self.dt = dt
        self.state = state


class SnapshotError(IOError):
    """Unreadable, truncated or version-mismatched snapshot file."""
