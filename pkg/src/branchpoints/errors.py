"""Exception hierarchy shared by the library and the command line."""

from __future__ import annotations


class BranchPointError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(BranchPointError, ValueError):
    """Malformed or semantically invalid family configuration.

    ``field`` is a dotted path such as ``levels[2].e0`` and ``line`` the
    1-based source line when it could be recovered.
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class NumericalError(BranchPointError):
    """A numerical procedure failed to produce a trustworthy answer."""


class EigenSolverError(NumericalError):
    def __init__(self, message: str, matrix=None):
        self.matrix = matrix
        super().__init__(message)


class ConvergenceError(NumericalError):
    def __init__(self, message: str, history=None):
        self.history = list(history or [])
        super().__init__(message)


class HigherOrderDegeneracyError(NumericalError):
    """More than two eigenvalues coalesce at the located root."""

    def __init__(self, message: str, a=None, values=None):
        self.a = a
        self.values = values
        super().__init__(message)


class TrackingError(NumericalError):
    """State labels could not be carried unambiguously between two points."""

    def __init__(self, message: str, interval=None):
        self.interval = interval
        super().__init__(message)


class CertificationError(BranchPointError):
    """A located branch point failed its monodromy check."""
