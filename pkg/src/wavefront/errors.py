"""Exception hierarchy shared by all wavefront modules."""


class WavefrontError(Exception):
    """Base class for every error raised by this package."""


# model
class NoPositiveFixedPoint(WavefrontError):
    pass


class MultipleFixedPoints(WavefrontError):
    pass


class InvalidSampleCount(WavefrontError):
    pass


# charfun
class CharOverflow(WavefrontError):
    pass


class NoPositiveRoot(WavefrontError):
    pass


class NoNegativeRoot(WavefrontError):
    pass


class ConvergenceFailure(WavefrontError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


# fundsol
class NotHyperbolic(WavefrontError):
    pass


class QuadratureTolExceeded(WavefrontError):
    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class HorizonExceeded(WavefrontError):
    pass


class GridMismatch(WavefrontError):
    pass


# reduction
class NotInDkappa(WavefrontError):
    pass


class NegativityViolated(WavefrontError):
    pass


class NegativeInput(WavefrontError):
    pass


class InterlacingViolated(WavefrontError):
    pass


# frontsolve
class RangeViolation(WavefrontError):
    pass


class NotInDL(WavefrontError):
    pass


class IterationLimitReached(WavefrontError):
    pass


class CollapsedToZero(WavefrontError):
    pass


class HypothesisFailure(WavefrontError):
    pass


# cli
class ConfigParseError(WavefrontError):
    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.line = line
        self.key = key


class ConfigValidationError(WavefrontError):
    def __init__(self, problems):
        super().__init__("; ".join(problems))
        self.problems = list(problems)
