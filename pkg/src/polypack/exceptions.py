"""
Exceptions raised by polypack.

Every class also derives from the closest builtin so callers can catch
either the polypack type or the builtin one.
"""


class PolypackError(Exception):
    """Base class for all polypack errors."""


class DegenerateConfigurationError(PolypackError, ValueError):
    """Coincident centers or duplicate Voronoi sites."""


class NonFiniteEnergyError(PolypackError, ArithmeticError):
    """The energy became NaN or infinite during a minimization."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class OverlapError(PolypackError, ValueError):
    """Two disks overlap beyond the allowed tolerance."""


class NoContactsError(PolypackError, ValueError):
    """No contact pairs were found at the requested threshold."""


class LedgerViolationError(PolypackError, RuntimeError):
    """The topological charge ledger does not add up to 6."""

    def __init__(self, message, ledger=None):
        super().__init__(message)
        self.ledger = ledger


class RecordFormatError(PolypackError, ValueError):
    """A record or point file could not be parsed."""


class AuditFailure(PolypackError):
    """A stored record failed the overlap, containment or density audit."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StoreConflictError(PolypackError):
    """The record store could not be updated consistently."""
