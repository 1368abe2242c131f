"""
Exception hierarchy shared by the group, kernel, quadrature and Hardy-space modules
"""

from typing import Optional


class RieszLabError(Exception):
    """Base class for every failure raised by the laboratory"""

    exit_code = 1


class InvalidPointError(RieszLabError, ValueError):
    """A group point with non-finite coordinates or a height outside [1e-300, 1e300]"""

    exit_code = 2


class InvalidParameterError(RieszLabError, ValueError):
    """A parameter outside the domain of an operation"""

    exit_code = 2


class NonFiniteError(RieszLabError, ArithmeticError):
    """A function returned inf or nan where a finite value was required"""


class SingularPointError(RieszLabError, ArithmeticError):
    """Evaluation requested at the singularity of a kernel"""


class OutOfDomainError(RieszLabError, ValueError):
    """An asymptotic expansion evaluated inside the closed unit ball"""


class QuadratureError(RieszLabError):
    """Panel budget exhausted before the requested tolerance was met"""

    exit_code = 3

    def __init__(self, message: str, value: Optional[float] = None, error: Optional[float] = None):
        super().__init__(message)
        self.value = value
        self.error = error


class OrderExhaustedError(RieszLabError):
    """Series truncation order dropped to zero during rewriting"""


class ShapeMismatchError(RieszLabError):
    """A derived principal part does not have the expected monomial shape"""


class StrategyDisagreementError(RieszLabError):
    """Near-field and far-field evaluations disagree in their overlap band"""

    def __init__(self, message: str, relative_error: float):
        super().__init__(message)
        self.relative_error = relative_error


class GridTooCoarseError(RieszLabError, ValueError):
    """A grid does not resolve the smallest scale it has to carry"""

    exit_code = 2


class SearchFailureError(RieszLabError):
    """A parameter search or a sampled inclusion check failed"""
