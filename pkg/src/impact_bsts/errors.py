"""Exception hierarchy shared across the package."""

from __future__ import annotations


class ImpactError(Exception):
    """Base class for all errors raised by impact_bsts."""


class InputError(ImpactError, ValueError):
    """Bad user input: malformed series, configs or files."""


class EmptyIntersection(InputError):
    pass


class TooShort(InputError):
    pass


class NoPoints(InputError):
    pass


class DuplicateTrend(InputError):
    pass


class DuplicateSeasonal(InputError):
    pass


class ConstantSeries(InputError):
    pass


class AllZeroActuals(InputError):
    pass


class InsufficientData(InputError):
    pass


class MissingPostCovariate(InputError):
    pass


class NonContiguousDates(InputError):
    pass


class DuplicateColumn(InputError):
    pass


class UnparseableValue(InputError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r}")
        self.row = row
        self.column = column
        self.value = value


class NumericalError(ImpactError, ArithmeticError):
    """Failures inside the filter or the sampler."""

    def __init__(self, message: str, iteration: int | None = None):
        if iteration is not None:
            message = f"{message} (MCMC iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class NumericalFailure(NumericalError):
    pass


class SingularInformation(NumericalError):
    pass


class DegenerateDraws(NumericalError):
    pass


class NetworkError(ImpactError):
    pass


class HttpError(NetworkError):
    def __init__(self, status: int, url: str = ""):
        super().__init__(f"HTTP {status} for {url}" if url else f"HTTP {status}")
        self.status = status
        self.url = url


class ParseError(NetworkError, ValueError):
    pass


class RangeTooLarge(InputError):
    pass
