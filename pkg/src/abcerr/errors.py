"""Exception hierarchy shared by every sampler and estimator."""


class ABCError(Exception):
    """Base class for all errors raised by :mod:`abcerr`."""


class DimensionMismatch(ABCError, ValueError):
    """Observation and simulator output cannot be compared."""


class InvalidBound(ABCError, ValueError):
    """A kernel density exceeded its declared normalizing bound ``c``."""


class Unsupported(ABCError, TypeError):
    pass


class DivisionByZero(ABCError, ZeroDivisionError):
    pass


class ZeroAcceptance(ABCError, RuntimeError):
    """No proposal was accepted within the proposal budget.

    Usually means the tolerance is too small or the model cannot reproduce
    the observation.
    """


class InvalidState(ABCError, ValueError):
    """A chain state has zero kernel density, so ratios are undefined."""


class InitFailure(ABCError, RuntimeError):
    pass


class AllWeightsZero(ABCError, ValueError):
    """A weighted sample carries no posterior mass."""


class ZeroDenominator(ABCError, ZeroDivisionError):
    pass


class ConfigError(ABCError, ValueError):
    """Experiment configuration problems.

    ``errors`` holds every problem found, not just the first one.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ParseError(ConfigError):
    pass


class UnknownName(ConfigError):
    pass


class ConstraintViolation(ConfigError):
    pass
