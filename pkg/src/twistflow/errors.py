"""Exception types shared across the package."""


class TwistflowError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(TwistflowError):
    """Field sample count does not match the grid it is used on."""


class UnsupportedOrderError(TwistflowError):
    """Requested derivative order is not provided."""


class DomainError(TwistflowError, ValueError):
    """Input violates a documented precondition (sign, range, shape of data)."""


class ConfigError(TwistflowError, ValueError):
    """Scenario configuration failed validation; message names the field."""


class StabilityError(TwistflowError):
    """Requested time step exceeds the explicit-stepping stability limit."""


class StagnationError(TwistflowError):
    """Adaptive time step underflowed; the integration cannot make progress."""


class PositivityLossError(TwistflowError):
    """Backward conjugate solve lost positivity (time step too large)."""


class EigensolverError(TwistflowError):
    """Dense eigensolve failed or returned an inconsistent ground state."""


class BlowUpError(TwistflowError):
    """Curvature blow-up (or non-finite state) detected during integration.

    Carries the partial trajectory computed so far in ``partial`` and the
    last valid state in ``last_state``.
    """

    def __init__(self, message, partial=None, last_state=None):
        super().__init__(message)
        self.partial = partial
        self.last_state = last_state
