"""Exception types raised across the package."""


class SplineBVPError(Exception):
    """Base class for every error raised by splinebvp."""


class InvalidDomainError(SplineBVPError, ValueError):
    pass


class DimensionError(SplineBVPError, ValueError):
    pass


class OutOfDomainError(SplineBVPError, ValueError):
    pass


class DerivativeOrderError(SplineBVPError, ValueError):
    pass


class DegenerateGeometryError(SplineBVPError, ArithmeticError):
    """The knot geometry makes an end-matching system singular."""


class SingularSystemError(SplineBVPError, ArithmeticError):
    pass


class NoConvergenceError(SplineBVPError, ArithmeticError):
    """Newton iteration ran out of iterations.

    The best iterate seen is kept on ``best`` so callers can inspect it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SingularSensitivityError(SplineBVPError, ArithmeticError):
    pass


class EvaluationError(SplineBVPError, FloatingPointError):
    pass


class LogDomainError(SplineBVPError, ValueError):
    pass


class DivisionGuardError(SplineBVPError, ZeroDivisionError):
    pass


class ConfigError(SplineBVPError, ValueError):
    pass
