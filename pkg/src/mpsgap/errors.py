"""Shared exception types."""


class SizeGuardError(ValueError):
    """A dense-space request exceeds the global size guard."""


class EmptySectorError(ValueError):
    """The requested symmetry sector contains no states."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolve did not converge; carries best residuals."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class StiffnessError(RuntimeError):
    """The Hessian in the optimal-path ODE is too ill-conditioned to invert."""


class FeasibilityError(ValueError):
    """An optimization step left the positive-definite cone."""
