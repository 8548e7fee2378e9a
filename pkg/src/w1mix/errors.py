"""Exception hierarchy shared across the package."""


class W1MixError(Exception):
    """Base class for all package errors."""


class InputError(W1MixError, ValueError):
    """An argument violates a documented precondition."""


class DivergenceError(W1MixError):
    """An integral (or series) failed its convergence test.

    Carries the partial value accumulated before the test failed, which is a
    lower bound for nonnegative integrands.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class IndefiniteKernelError(W1MixError):
    """A covariance matrix is materially indefinite (beyond roundoff)."""

    def __init__(self, message, worst_eigenvalue):
        super().__init__(message)
        self.worst_eigenvalue = worst_eigenvalue


class PreconditionError(W1MixError):
    """A theory-side precondition fails, so the requested computation does
    not apply.  The CLI maps this to exit code 2."""
