"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line front end can map
error classes to distinct process exit statuses.
"""


class CompShockError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidArgumentError(CompShockError, ValueError):
    exit_code = 2


class UsageError(InvalidArgumentError):
    exit_code = 2


class SchemaError(CompShockError, ValueError):
    exit_code = 3


class ParseError(SchemaError):
    exit_code = 3


class EmptyInputError(SchemaError):
    exit_code = 3


class NormalizationError(CompShockError, ValueError):
    """A model violates the unit effect normalization."""

    exit_code = 4

    def __init__(self, message, shock=None):
        super().__init__(message)
        self.shock = shock


class UndefinedEventError(CompShockError, ValueError):
    exit_code = 4


class RelevanceError(CompShockError, ArithmeticError):
    """Instrument covariance with the normalizing variable is (numerically) zero."""

    exit_code = 5


class DivisionError(CompShockError, ZeroDivisionError):
    """A response used as a denominator is zero."""

    exit_code = 5

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class RankConditionError(CompShockError, ArithmeticError):
    exit_code = 6


class UnderIdentificationError(RankConditionError):
    exit_code = 6


class IdentificationError(RankConditionError):
    """Parameters are not (locally) identified by the supplied moments."""

    exit_code = 6


class CollinearityError(CompShockError, ArithmeticError):
    exit_code = 6

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class WeightingError(CompShockError, ArithmeticError):
    exit_code = 6


class InsufficientSampleError(CompShockError, ValueError):
    exit_code = 7


class ConvergenceError(CompShockError, RuntimeError):
    exit_code = 8

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class SingularityError(ConvergenceError):
    exit_code = 8


class DegenerateLineError(CompShockError, ValueError):
    exit_code = 9


class NonIdentificationError(CompShockError, ValueError):
    exit_code = 9
