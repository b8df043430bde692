"""Exception hierarchy. CLI exit codes are keyed off these classes."""


class GroupTestingError(Exception):
    """Base class for all library errors."""


class ResourceGuardError(GroupTestingError):
    """A computation would exceed its configured size guard."""


class NumericalError(GroupTestingError):
    """An iterative or quadrature routine failed to converge."""


class DegenerateError(GroupTestingError, ValueError):
    """Parameters sit on a boundary where the requested object does not exist."""
