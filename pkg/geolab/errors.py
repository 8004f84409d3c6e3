"""
Geodesic Lab - Error Types

This module defines the exceptions raised by the library. Input problems are
ValueError subclasses; failed certificates and violated bounds are runtime
errors that the CLI maps to dedicated exit codes.
"""


class BoundaryPointError(ValueError):
    """Point lies on a removed grid line or circle"""


class NormBoundError(ValueError):
    """Norm exceeds the configured desk-scale bound"""


class NotLoxodromicError(ValueError):
    """Matrix is parabolic, elliptic or +-identity"""


class InadmissibleWordError(ValueError):
    """Word violates the transition matrix"""

    def __init__(self, message: str, position: int = -1):
        super().__init__(message)
        self.position = position


class CertificationError(RuntimeError):
    """An exact-arithmetic certificate could not be established"""


class BoundViolationError(RuntimeError):
    """A proved bound was violated by a computed value"""

    def __init__(self, message: str, violations: int = 1):
        super().__init__(message)
        self.violations = violations
