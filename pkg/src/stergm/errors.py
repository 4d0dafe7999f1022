"""Exception taxonomy shared across the package.

CLI exit codes: ConfigError family maps to 2, NumericalError to 3,
DegeneracyError to 4; anything else is a bug.
"""


class StergmError(Exception):
    """Base class for all package errors."""


class ConfigError(StergmError):
    """Malformed input files, unknown terms, missing attribute levels."""


class ContractError(StergmError):
    """A documented precondition was violated by the caller."""


class DomainError(StergmError):
    """Numeric argument outside the mathematical domain of an operation."""


class BoundaryError(DomainError):
    """An estimate sits at an infinite boundary (e.g. all or no isolates)."""


class NumericalError(StergmError):
    """Linear algebra failed beyond recovery (singular covariance, etc.)."""


class DegeneracyError(StergmError):
    """Moment estimation pinned at the hull of attainable statistics."""


class UnsupportedModelError(StergmError):
    """The model lies outside the class an operation is defined for."""


class UndefinedTargetError(StergmError):
    """A target statistic is undefined on the given network (e.g. mean tie
    age of an empty network)."""
