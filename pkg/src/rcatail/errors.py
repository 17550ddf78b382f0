"""Exception hierarchy.

The CLI maps the three top-level families onto exit codes 2, 3 and 4.
"""


class RcaError(Exception):
    """Base class for every error raised by this package."""


class InvalidModelError(RcaError, ValueError):
    """The model (or a requested method) is not admissible."""


class OrderTooLargeError(InvalidModelError):
    pass


class EquivalenceNotCertifiedError(InvalidModelError):
    """AR-ARCH equivalence requested for a model with non-gaussian noise."""


class NotStationaryError(RcaError):
    """An operation requiring a stationary model got one that is not."""


class NumericalError(RcaError, ArithmeticError):
    pass


class ExplosionError(NumericalError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite value at step {step}; the recursion exploded")


class DegenerateDrawError(NumericalError):
    """A coefficient draw produced a singular companion matrix."""


class DegenerateStepError(NumericalError):
    pass


class NoConvergenceError(NumericalError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"power iteration did not converge after {iterations} iterations "
                         f"(residual {residual:.3e})")


class NoRootError(NumericalError):
    pass


class InconsistencyError(NumericalError):
    pass


class MissingDrawsError(RcaError, ValueError):
    pass
