"""Exception hierarchy shared by every module."""


class LieVortexError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(LieVortexError, ValueError):
    pass


class InvalidElement(LieVortexError, ValueError):
    """Raised when a matrix violates a skew-symmetry or orthogonality check."""


class SylvesterSolveFailed(LieVortexError, ArithmeticError):
    pass


class SingularMassMatrix(LieVortexError, ArithmeticError):
    pass


class StepRejected(LieVortexError):
    """An integration step pushed an invariant drift past its budget.

    ``t`` is the time of the offending sample and ``report`` the drift values there.
    """

    def __init__(self, message, t=None, report=None):
        super().__init__(message)
        self.t = t
        self.report = report or {}


class HorizonExceeded(LieVortexError, ValueError):
    pass


class BudgetExhausted(LieVortexError):
    """Steering search ran out of budget; the best signal found is attached."""

    def __init__(self, message, signal=None, distance=None):
        super().__init__(message)
        self.signal = signal
        self.distance = distance


class ConfigError(LieVortexError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
