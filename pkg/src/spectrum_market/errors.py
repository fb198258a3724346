"""Exception hierarchy shared by the solvers and the CLI."""


class MarketError(Exception):
    """Base class for every error raised by this package."""


class InvalidParametersError(MarketError, ValueError):
    pass


class DimensionMismatchError(MarketError, ValueError):
    pass


class NonSymmetricError(MarketError, ValueError):
    pass


class SingularMatrixError(MarketError):
    pass


class SignViolationError(MarketError):
    """A derived quantity has the wrong sign for a market that passed validation."""


class DegenerateMarketError(MarketError):
    pass


class InconsistentCaseError(MarketError):
    pass


class SingularSystemError(MarketError):
    pass


class NoConvergenceError(MarketError):
    pass


class BoundaryPointError(MarketError):
    """The StrictBR map switches branch at the point, so its Jacobian is undefined."""


class NonFiniteError(MarketError):
    """A price orbit left the representable range (overflow guard)."""


DivergedError = NonFiniteError


class PenaltyDomainError(MarketError, ValueError):
    """Demand reached the capacity, where the log-delay penalty is undefined."""


class NoInteriorSolutionError(MarketError):
    pass


class ToleranceError(MarketError):
    pass


class InfeasibleMarketError(MarketError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class ConditionViolationError(MarketError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ComplexRootsError(MarketError):
    pass


class ParseError(MarketError):
    pass


class ValidationError(MarketError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class MissingGoldenError(MarketError, FileNotFoundError):
    pass
