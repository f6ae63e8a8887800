"""Exception hierarchy."""


class AmbirotError(Exception):
    """Base class for package errors."""


class GroupMismatchError(AmbirotError, ValueError):
    """Operands belong to different symmetry groups."""


class DegenerateSampleError(AmbirotError, ValueError):
    """The data do not support the requested statistic.

    Raised for point-mass samples, singular covariances, non-unique
    sample means and similar degeneracies.
    """


class OutsideNeighbourhoodError(AmbirotError, ValueError):
    """A point lies outside the tangent-coordinate neighbourhood."""
