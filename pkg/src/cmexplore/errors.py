"""Exception hierarchy shared across the package.

The CLI maps :class:`InvalidInput` subclasses to exit code 2 and
:class:`NumericalFailure` subclasses to exit code 3.
"""


class CMExploreError(Exception):
    pass


class InvalidInput(CMExploreError, ValueError):
    pass


class NumericalFailure(CMExploreError, ArithmeticError):
    pass


class EmptyInput(InvalidInput):
    pass


class OddDegreeSum(InvalidInput):
    pass


class ZeroDegree(InvalidInput):
    pass


class DomainError(InvalidInput):
    pass


class TooLarge(InvalidInput):
    pass


class Terminated(InvalidInput):
    pass


class InvalidControl(InvalidInput):
    pass


class ControlPathMismatch(InvalidInput):
    pass


class InvalidTarget(InvalidInput):
    pass


class AllZero(InvalidInput):
    pass


class NegativeInput(InvalidInput):
    pass


class NoConvergence(NumericalFailure):
    pass


class NoSignChange(NumericalFailure):
    pass


class StepTooLarge(NumericalFailure):
    pass


class ZeroIntensityJump(NumericalFailure):
    pass
