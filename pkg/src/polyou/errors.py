"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class PolyOUError(Exception):
    """Base class for every error raised by the package."""


class InputError(PolyOUError, ValueError):
    """Invalid user input (parameters, config, quotes)."""


class NumericalError(PolyOUError, ArithmeticError):
    """A computation failed to produce a trustworthy number."""


class SingularJ(NumericalError):
    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"singular J at step {step}{': ' + detail if detail else ''}")


class NonFinite(NumericalError):
    def __init__(self, step: int, detail: str = ""):
        self.step = step
        super().__init__(f"non-finite Riccati state at step {step}{': ' + detail if detail else ''}")


class Overflow(NumericalError):
    pass


class NonReal(NumericalError):
    pass


class BoundsViolated(NumericalError):
    pass


class NegativeVariance(NumericalError):
    pass


class FitFailed(NumericalError):
    pass


class OutOfBounds(InputError):
    pass


class NotConverged(NumericalError):
    def __init__(self, message: str, best=None):
        self.best = best
        super().__init__(message)
