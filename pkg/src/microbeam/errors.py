"""Exception types shared across the package."""


class MicrobeamError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(MicrobeamError, ValueError):
    """A geometry, material or discretization parameter violates its invariants."""


class UnsupportedOrderError(MicrobeamError, ValueError):
    """Requested shape-function series order above the implemented truncation."""


class InvalidArgumentError(MicrobeamError, ValueError):
    """Operation argument outside its valid range (mode count, attach position, ...)."""


class SingularSystemError(MicrobeamError):
    """The constrained system is singular (insufficient boundary constraints)."""


class ConvergenceError(MicrobeamError):
    """Fixed-point axial coupling failed to converge; carries the last iterate."""

    def __init__(self, message, last_state=None, last_axial_force=None):
        super().__init__(message)
        self.last_state = last_state
        self.last_axial_force = last_axial_force


class DivergenceError(MicrobeamError):
    """Time integration produced non-finite values (time step too large)."""


class ModelError(MicrobeamError):
    """Numerical result contradicts the model (e.g. no positive buckling factor)."""


class FullyConstrainedError(MicrobeamError):
    """Every deflection DOF is constrained; nothing left to solve."""


class ProtocolError(MicrobeamError, ValueError):
    """Malformed wire message or config file."""


class RecordingError(MicrobeamError):
    """Session recording is unreadable, truncated, or version-incompatible."""
