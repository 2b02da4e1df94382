"""Exception types shared across the package.

Plain ``ValueError`` is used for ordinary argument mistakes (bad shapes,
out-of-range counts); the classes below mark conditions callers may want to
catch specifically.
"""


class DomainError(ValueError):
    """A query point lies outside the domain of a function."""


class RangeError(ValueError):
    """A value violates a declared range such as [0, H]."""


class CapacityError(RuntimeError):
    """A combinatorial guard was exceeded; the message names the workaround."""


class SolverError(RuntimeError):
    """The LP solver failed numerically (no acceptable pivot)."""


class ConsistencyError(RuntimeError):
    """An internal cross-check failed (e.g. a selector beating its oracle)."""
