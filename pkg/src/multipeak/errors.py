"""Exception hierarchy shared by every stage of the pipeline."""


class MultipeakError(Exception):
    """Base class for all errors raised by this package."""


class SubcriticalityViolation(MultipeakError):
    pass


class NonConvergence(MultipeakError):
    pass


class QuadratureDivergence(MultipeakError):
    pass


class SignViolation(MultipeakError):
    pass


class HypothesisViolation(MultipeakError):
    pass


class EmptyWindow(MultipeakError):
    pass


class NoConvergence(MultipeakError):
    pass


class InadmissibleTriplet(MultipeakError):
    pass


class ConstraintViolation(MultipeakError):
    pass


class StepTooLarge(MultipeakError):
    pass


class NonContraction(MultipeakError):
    pass


class Singular(MultipeakError):
    pass


class MaxIterExceeded(MultipeakError):
    pass


class LineSearchStall(MultipeakError):
    pass
