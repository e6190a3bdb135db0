"""Reliability problems: input distribution, performance function, failure threshold.

A failure event is ``{x : f(x) > u}`` for a deterministic performance
function ``f`` and threshold ``u``.  Inputs are independent normal
marginals, which is all the built-in test cases need.
"""

import numpy as np

from .errors import EvaluationError

_LOG_2PI = float(np.log(2.0 * np.pi))


class InputDistribution:
    """Product of independent normal marginals on R^d.

    Parameters
    ----------
    means : array_like, shape (d,)
        Marginal means.
    sds : array_like, shape (d,)
        Marginal standard deviations, all strictly positive.
    """

    def __init__(self, means, sds):
        means = np.atleast_1d(np.asarray(means, dtype=float))
        sds = np.atleast_1d(np.asarray(sds, dtype=float))
        if means.ndim != 1 or sds.ndim != 1 or means.shape != sds.shape:
            raise ValueError("means and sds must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(sds))):
            raise ValueError("means and sds must be finite")
        if np.any(sds <= 0.0):
            raise ValueError("all standard deviations must be strictly positive")
        self.means = means
        self.sds = sds
        self.dims = means.size

    def sample(self, n, rng):
        """Draw ``n`` i.i.d. points, returned as an (n, d) matrix."""
        if n < 1:
            raise ValueError("n must be >= 1")
        z = rng.standard_normal(size=(int(n), self.dims))
        return self.means + self.sds * z

    def logpdf(self, x):
        """Log density at a single d-vector or an (n, d) batch of points."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dims:
            raise ValueError(f"expected points of dimension {self.dims}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite input coordinates")
        z = (pts - self.means) / self.sds
        out = -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(self.sds)) \
            - 0.5 * self.dims * _LOG_2PI
        return float(out[0]) if single else out

    def __repr__(self):
        return f"InputDistribution(means={self.means.tolist()}, sds={self.sds.tolist()})"


class ReliabilityProblem:
    """Performance function plus input distribution plus failure threshold.

    ``performance`` maps an (n, d) matrix to an (n,) vector and must be
    deterministic: identical inputs give bit-identical outputs.

    Parameters
    ----------
    input : InputDistribution
    performance : callable
        Vectorized map from (n, d) points to (n,) values.
    failure_threshold : float
        Failure is the event ``performance(x) > failure_threshold``.
    name : str, optional
    """

    def __init__(self, input, performance, failure_threshold, name=""):
        if not np.isfinite(failure_threshold):
            raise ValueError("failure_threshold must be finite")
        self.input = input
        self.performance = performance
        self.failure_threshold = float(failure_threshold)
        self.name = name

    @property
    def dims(self):
        return self.input.dims

    def __repr__(self):
        return (f"ReliabilityProblem(name={self.name!r}, d={self.dims}, "
                f"u={self.failure_threshold})")


def eval_performance(problem, x):
    """Evaluate the performance function at one d-vector.

    Raises ``ValueError`` on non-finite input coordinates and
    ``EvaluationError`` if the function value itself is non-finite.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != problem.dims:
        raise ValueError(f"expected a vector of dimension {problem.dims}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input coordinates")
    y = float(np.asarray(problem.performance(x[None, :]))[0])
    if not np.isfinite(y):
        raise EvaluationError(f"performance function returned {y} at x={x.tolist()}")
    return y


def sample_input(dist, n, rng):
    """Draw ``n`` i.i.d. input points; reproducible given the generator state."""
    return dist.sample(n, rng)


def input_logpdf(dist, x):
    """Log input density at a single point."""
    return dist.logpdf(x)


class PerformanceCounter:
    """Counting wrapper around a problem's performance function.

    Every estimator owns one counter per run; its total is the evaluation
    count N reported everywhere, initial design included.  A run is
    single-threaded, so the counter is a plain integer; parallel
    replications each own their counter (per-process aggregation).
    """

    def __init__(self, problem):
        self.problem = problem
        self.count = 0

    def evaluate(self, x):
        """Evaluate at a (n, d) batch (returns (n,)) or a d-vector (returns float)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            self.count += 1
            x2 = x[None, :]
        else:
            self.count += x.shape[0]
            x2 = x
        y = np.asarray(self.problem.performance(x2), dtype=float)
        if not np.all(np.isfinite(y)):
            bad = x2[~np.isfinite(y)][0]
            raise EvaluationError(f"non-finite performance value at x={bad.tolist()}")
        return float(y[0]) if x.ndim == 1 else y


def _cantilever_performance(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 18.46154 - 7.476923e10 * x[:, 0] / x[:, 1] ** 3


def cantilever():
    """Deviation of a cantilever beam with rectangular cross-section.

    Two normally distributed inputs (load and depth-like factors); failure
    is a tip deviation above 17.8.  The failure probability is about
    3.85e-5.
    """
    dist = InputDistribution(means=[0.001, 250.0], sds=[0.0002, 37.5])
    return ReliabilityProblem(dist, _cantilever_performance, 17.8, name="cantilever")


def _identity_performance(x):
    return np.asarray(x, dtype=float)[:, 0]


def gaussian_tail(threshold=2.3263):
    """1-D toy: f(x) = x with standard normal input.

    The failure probability is the normal upper-tail probability of the
    threshold; the default 2.3263 gives alpha = 0.01 to four figures.
    """
    dist = InputDistribution(means=[0.0], sds=[1.0])
    return ReliabilityProblem(dist, _identity_performance, threshold,
                              name="gaussian-tail")


_REGISTRY = {
    "cantilever": cantilever,
    "gaussian-tail": gaussian_tail,
}


def get_problem(name, failure_threshold=None):
    """Look up a built-in problem by name, optionally overriding its threshold."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {sorted(_REGISTRY)}") from None
    problem = factory()
    if failure_threshold is not None:
        problem = ReliabilityProblem(problem.input, problem.performance,
                                     failure_threshold, name=problem.name)
    return problem
