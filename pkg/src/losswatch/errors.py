"""Exception taxonomy shared across the package.

CLI exit-code mapping: UsageError / DomainError -> 2, NumericalError -> 3,
ResourceError -> 4.
"""


class LosswatchError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(LosswatchError):
    """Invalid call: bad argument combination, dimension mismatch, misuse."""


class DomainError(LosswatchError):
    """Parameter outside its mathematical domain (e.g. variance <= 0)."""


class TargetRangeError(UsageError):
    """Requested target lies outside the achievable range (span is named)."""


class NumericalError(LosswatchError):
    """A numerical procedure failed to converge or lost validity."""


class ResourceError(LosswatchError):
    """Request exceeds a configured size bound."""
