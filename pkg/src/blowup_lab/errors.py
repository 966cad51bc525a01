"""Exception types shared across the package."""
from __future__ import annotations


class DomainError(ValueError):
    """Parameters outside the range where a quantity is defined."""


class SingularityError(DomainError):
    """Evaluation of an unbounded profile at the origin."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature hit its refinement limit before meeting tolerance.

    ``estimate`` and ``error`` carry the best value and its error bound.
    """

    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(f"{message} (estimate={estimate:.16g}, error={error:.3g})")
        self.estimate = estimate
        self.error = error
