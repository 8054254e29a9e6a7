"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A law parameter is outside its admissible domain."""


class InfiniteMeanError(ValueError):
    """The requested quantity needs a finite mean that the law does not have."""


class OutOfRangeError(ValueError):
    """An inversion target lies outside the function's range."""


class IncompatibleMomentsError(ValueError):
    """Empirical moments are incompatible with the assumed parametric family."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class DegenerateSaddleError(RuntimeError):
    """The Hessian at the saddlepoint is not positive definite."""
