"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An operation was called on inputs outside its domain of validity."""


class ConfigurationError(ValueError):
    """A parameter combination admits no valid computation."""


class RangeError(PreconditionError):
    """Evaluation point outside the tabulated range of a nonlinearity."""


class DivergenceError(RuntimeError):
    """The radial initial value problem blew up before reaching r = 1."""

    def __init__(self, message, radius=None):
        super().__init__(message)
        self.radius = radius


class BeyondExtremalError(RuntimeError):
    """No minimal-branch solution exists for the requested parameter."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to converge within its budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnstableSolutionError(PreconditionError):
    """An estimate that requires a stable solution received an unstable one."""
