"""Exception types shared across the package."""


class DetectionError(Exception):
    """Base class for all package errors."""


class ConfigError(DetectionError, ValueError):
    """Invalid parameters: dimension mismatch, window too small, bad ranges."""


class DataError(DetectionError, ValueError):
    """Non-finite or malformed observations."""


class InsufficientTrainingError(DataError):
    pass


class NotReadyError(DetectionError, RuntimeError):
    """The window does not hold ``H`` observations yet."""


class NumericError(DetectionError, ArithmeticError):
    """Quadrature or root finding did not converge."""


class CalibrationError(NumericError):
    pass


class InconclusiveError(DetectionError, RuntimeError):
    """Every Monte Carlo replicate was censored."""
