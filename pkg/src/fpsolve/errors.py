"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, problem or run configuration."""


class PositivityError(ValueError):
    """A sampled invariant measure drops below the positivity floor."""

    def __init__(self, message, index=None, point=None, value=None):
        super().__init__(message)
        self.index = index
        self.point = point
        self.value = value


class StencilError(RuntimeError):
    """A stencil reached further than two points past a boundary."""


class SingularMatrixError(ArithmeticError):
    """Matrix is numerically singular."""


class ConvergenceError(RuntimeError):
    """Iterative solve failed; carries the solver report."""

    def __init__(self, message, report=None, step=None):
        super().__init__(message)
        self.report = report
        self.step = step


class EntropyDomainError(ValueError):
    """Entropy function evaluated outside its domain."""
