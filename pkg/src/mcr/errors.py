"""Exception hierarchy shared by all estimation modules."""

from __future__ import annotations


class McrError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(McrError):
    """Shapes of parameters and data disagree (K, p, q, or n)."""


class KMismatch(DimensionMismatch):
    """Two parameter blocks declare different class counts."""


class InvariantViolation(McrError):
    """A domain-type invariant failed; the message names the invariant."""


class SingularDesign(McrError):
    """A cross-product matrix is numerically rank deficient."""

    def __init__(self, message: str, columns: tuple[int, ...] = ()):
        super().__init__(message)
        self.columns = columns


class EmptyClass(McrError):
    """A class received (numerically) zero total posterior weight."""


class DegenerateWeights(McrError):
    """Per-feature EM weights summed below tolerance for some class."""


class ColumnOutOfRange(McrError):
    """Feature column index outside [0, p)."""


class MissingLabels(McrError):
    """Operation requires true class labels but the dataset has none."""


class ZeroVariance(McrError):
    """Response vector is constant where variability is required."""


class EmptyVocabulary(McrError):
    """No term survived frequency filtering and the stoplist."""


class SchemaMismatch(McrError):
    """A model file and a dataset file describe incompatible shapes."""


class NonConvergence(McrError):
    """Reserved for callers that want to escalate a non-converged trace.

    The fitting routines themselves never raise this; they report
    ``converged=False`` on the trace instead.
    """
