"""Exception types shared across the package."""


class FieldSenseError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(FieldSenseError):
    """Objects that must share an ambient dimension do not."""


class SizeCapError(FieldSenseError):
    """A generator was asked for more elements than the configured cap."""


class DuplicatePointError(FieldSenseError):
    """Two sensor locations coincide (within the coordinate merge tolerance)."""


class RelabelingError(FieldSenseError):
    """A coordinate relabeling is unusable: uncovered value, collision, or
    a search space beyond the configured cap."""


class SingularEvaluationError(FieldSenseError):
    """A model function was evaluated at (or too close to) one of its
    singularities."""


class RankDeficiencyError(FieldSenseError):
    """A matrix that must have full rank does not.

    Carries the offending :class:`~fieldsense.linear_systems.RankReport` and a
    human-readable description of the vanishing column combinations when the
    caller provided column labels.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LinearSolveError(FieldSenseError):
    """A solve produced a residual beyond the accepted tolerance."""


class ScenarioError(FieldSenseError):
    """A scenario file violates the schema or a cross-field invariant."""
