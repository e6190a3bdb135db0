"""Exception types shared across the package."""


class RareSimError(Exception):
    """Base class for all errors raised by this package."""


class EvaluationError(RareSimError):
    """The performance function returned a non-finite value."""


class GpFitError(RareSimError):
    """Covariance estimation failed (non-SPD system after jitter escalation)."""


class GpPredictError(RareSimError):
    """Kriging prediction failed (singular system after jitter escalation)."""


class DuplicatePointError(RareSimError):
    """A new observation coincides with an existing design point."""


class NoSelectablePointError(RareSimError):
    """Every candidate duplicates an existing design point."""


class DegeneratePopulationError(RareSimError):
    """All particle weights are zero; the stage factor would vanish."""


class DegenerateModelError(RareSimError):
    """The threshold equation has no solution on the search bracket."""


class StageLearningError(RareSimError):
    """A stage's evaluation loop aborted; carries the partial model."""

    def __init__(self, message, model=None, evaluations=0):
        super().__init__(message)
        self.model = model
        self.evaluations = evaluations


class NonConvergenceError(RareSimError):
    """An estimator hit its stage cap; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ExperimentError(RareSimError):
    """Too many replications of an experiment failed."""
