"""Exception types raised by the library."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class ExtrapolationError(DomainError):
    """A tabulated function was evaluated outside its grid."""


class SingularInputError(DomainError):
    """An input hits a singularity (e.g. coincident points)."""


class InsufficientSignal(RuntimeError):
    """A Monte-Carlo estimate is too noisy for the requested derived quantity."""
