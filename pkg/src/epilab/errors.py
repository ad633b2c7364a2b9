"""Exception types raised by epilab."""


class EpilabError(Exception):
    """Base class for all epilab errors."""


class NumericError(EpilabError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable number."""


class AllZeroError(NumericError, ValueError):
    pass


class NonFiniteError(NumericError, ValueError):
    pass


class DomainTooSmallError(EpilabError, ValueError):
    pass


class DomainTooSmallWarning(UserWarning):
    pass


class EmptyKeepError(EpilabError, ValueError):
    pass


class UnsupportedError(EpilabError, ValueError):
    pass


class NonPositiveLambdaError(EpilabError, ValueError):
    pass


class NonPositiveSError(EpilabError, ValueError):
    pass


class NegativeTimeError(EpilabError, ValueError):
    pass


class SingularCovarianceError(NumericError, ValueError):
    pass


class TailNotDecayingError(NumericError):
    pass


class CoreTooSmallError(EpilabError, ValueError):
    pass


class PreconditionError(EpilabError, ValueError):
    """Inputs do not satisfy the hypotheses of the requested check."""


class ConfigInvalid(EpilabError, ValueError):
    """Experiment configuration failed validation.

    ``errors`` lists one message per offending field.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
