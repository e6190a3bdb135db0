"""Posterior excursion probabilities and the adaptive per-stage learning loop.

Given a kriging model and a threshold u, the probability that the latent
process exceeds u at x is Gaussian: ``Phi((mean(x) - u) / sd(x))``.  The
misclassification probability ``min(g, 1 - g)`` measures how uncertain the
model still is about which side of the threshold x falls on; driving its
particle-cloud average below a tolerance is the stopping rule for adding
evaluations within a stage.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import NoSelectablePointError, RareSimError, StageLearningError
from .problems import PerformanceCounter


@dataclass(frozen=True)
class ExcursionQuery:
    """A model paired with the threshold the excursion refers to."""

    model: object
    threshold: float

    def __post_init__(self):
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


def excursion_from_moments(mean, var, threshold):
    """Excursion probability from posterior moments; exact indicator at sd = 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    out = np.where(sd > 0.0,
                   ndtr(np.divide(mean - threshold, sd,
                                  out=np.zeros_like(sd), where=sd > 0.0)),
                   (mean > threshold).astype(float))
    return out


def log_excursion_from_moments(mean, var, threshold):
    """Log excursion probability (stable far into the tail); -inf where g = 0."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(var, dtype=float))
    with np.errstate(divide="ignore"):
        smooth = log_ndtr(np.divide(mean - threshold, sd,
                                    out=np.zeros_like(sd), where=sd > 0.0))
        hard = np.where(mean > threshold, 0.0, -np.inf)
    return np.where(sd > 0.0, smooth, hard)


def excursion_prob(query, x):
    """Posterior probability that the process exceeds the threshold at x.

    Accepts a d-vector (returns a float) or an (m, d) batch (returns (m,)).
    """
    mean, var = query.model.predict(x)
    out = excursion_from_moments(mean, var, query.threshold)
    return float(out) if np.ndim(out) == 0 else out


def misclassification(query, x):
    """min(g, 1 - g): zero where the classification is certain, 1/2 at g = 1/2."""
    g = excursion_prob(query, x)
    return np.minimum(g, 1.0 - g)


def select_next_point(query, candidates):
    """Index of the candidate with the largest misclassification probability.

    Candidates within the duplicate tolerance of an existing design point
    are skipped; ties break to the lowest index.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] == 0:
        raise ValueError("candidates must be nonempty")
    tau = np.asarray(misclassification(query, candidates), dtype=float)
    dup = query.model.duplicates(candidates)
    if np.all(dup):
        raise NoSelectablePointError("all candidates duplicate existing design points")
    tau = np.where(dup, -1.0, tau)
    return int(np.argmax(tau))


def run_stage_learning(model, problem, threshold, particles, eta, budget,
                       refit_starts=1, rng=None, trace=None):
    """Add evaluations at max-misclassification points until the cloud is resolved.

    Repeatedly selects the particle with the largest misclassification
    probability, evaluates the performance function there, extends the
    model, and re-estimates the covariance parameters (warm start plus one
    fresh search), stopping once the mean misclassification over the
    particle cloud drops to ``eta`` or the evaluation ``budget`` runs out.

    Parameters
    ----------
    model : GpModel
    problem : ReliabilityProblem or PerformanceCounter
        Wrapped in a fresh counter when given bare, so shared counters
        keep aggregating across stages.
    threshold : float
    particles : ndarray, shape (m, d)
        Candidate cloud; selection is restricted to it.
    eta : float
        Stopping tolerance on the mean misclassification, > 0.
    budget : int
        Hard cap on evaluations within the stage, >= 0.
    refit_starts : int
        Fresh REML starts per update, besides the warm start.
    rng : numpy Generator, optional
        Seeds the randomized REML starts.
    trace : list, optional
        Appends one record per evaluation (selected point, mean tau).

    Returns
    -------
    (model, n_evaluations, mean_misclassification)
    """
    if eta <= 0.0:
        raise ValueError("eta must be > 0")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    evaluator = problem if isinstance(problem, PerformanceCounter) \
        else PerformanceCounter(problem)
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    query = ExcursionQuery(model, threshold)
    tau = misclassification(query, particles)
    mean_tau = float(np.mean(tau))
    n_evals = 0
    while mean_tau > eta and n_evals < budget:
        try:
            idx = select_next_point(query, particles)
            x = particles[idx]
            y = evaluator.evaluate(x)
            n_evals += 1
            seed = int(rng.integers(2 ** 31)) if rng is not None else 0
            model = model.add_observation(x, y).refit(n_starts=refit_starts, seed=seed)
        except RareSimError as err:
            raise StageLearningError(
                f"stage learning aborted after {n_evals} evaluations: {err}",
                model=model, evaluations=n_evals) from err
        query = ExcursionQuery(model, threshold)
        tau = misclassification(query, particles)
        mean_tau = float(np.mean(tau))
        if trace is not None:
            trace.append({"point": x.tolist(), "value": float(y),
                          "mean_tau": mean_tau})
    return model, n_evals, mean_tau
