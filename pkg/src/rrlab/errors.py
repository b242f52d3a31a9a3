"""Exception types raised across the package."""


class ContractError(ValueError):
    """Inputs violate an operation's preconditions (dimension mismatch etc.)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegeneratePointError(ValueError):
    """Field point lies on (or numerically at) the worldline."""


class SearchFailure(RuntimeError):
    """Retarded-time bracketing did not find a sign change."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class PrecisionError(RuntimeError):
    """A quadrature did not reach its target; ``estimate`` holds the best value."""

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class ConditioningError(RuntimeError):
    """Least-squares problem is too ill-conditioned to trust."""


class ProjectionError(RuntimeError):
    """State too far from the constraint manifold to be projected back."""


class DegenerateSystemError(RuntimeError):
    """Equation of motion has a vanishing leading coefficient."""
