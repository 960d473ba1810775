"""Exception hierarchy shared across the package."""


class BKError(Exception):
    """Base class for all errors raised by bkeigen."""


class GridMismatchError(BKError, ValueError):
    """Two grid functions that must share a grid do not."""


class ConeError(BKError, ValueError):
    """A cone query cannot be answered on the given grid."""


class IllegalSignPattern(BKError, ValueError):
    """A negative sign was requested for a component constrained to a cone."""


class VanishingOperator(BKError, ArithmeticError):
    """The operator norm needed for normalization is numerically zero."""


class DegenerateRetraction(BKError, ArithmeticError):
    """The retraction denominator vanished for every fallback direction."""


class NonConvergence(BKError):
    """The fixed-point iteration hit ``max_iter``.

    The best iterate is attached as ``result`` (with ``converged=False``).
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class KernelError(BKError, ValueError):
    """Bad kernel arguments, e.g. outside the domain or on the singularity."""


class ConfigError(BKError, ValueError):
    """Invalid run configuration."""
