"""Gaussian-process regression with constant unknown mean and Matern covariance.

The model is universal kriging with a single constant basis function, a
stationary anisotropic Matern covariance of half-integer regularity, and
noiseless observations stabilized by a small diagonal jitter.  Covariance
parameters are estimated by restricted maximum likelihood (REML), i.e.
the Gaussian likelihood with the constant mean profiled out.

Lengthscales live in *standardized* coordinates: raw inputs are divided
by per-coordinate scales (typically the input distribution's standard
deviations) before entering the kernel, so that REML searches a sane box
even when raw coordinates differ by orders of magnitude.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import DuplicatePointError, GpFitError, GpPredictError

SUPPORTED_REGULARITIES = (0.5, 1.5, 2.5)

# Relative jitter added to the unit-diagonal correlation matrix; escalates
# by 10 on Cholesky failure up to the maximum before declaring failure.
JITTER_START = 1e-10
JITTER_MAX = 1e-4

# Two design points closer than this (Euclidean distance in standardized
# coordinates) are treated as duplicates.
DUPLICATE_TOL = 1e-8

_SQRT3 = float(np.sqrt(3.0))
_SQRT5 = float(np.sqrt(5.0))


@dataclass(frozen=True)
class CovarianceParams:
    """Stationary Matern covariance parameters.

    Attributes
    ----------
    variance : float
        Process variance, strictly positive.
    lengthscales : ndarray, shape (d,)
        Anisotropic lengthscales in standardized coordinates, positive.
    regularity : float
        Matern smoothness, one of 1/2, 3/2, 5/2.
    degenerate : bool
        Set when REML saw constant observations and fell back to a
        floor variance.
    """

    variance: float
    lengthscales: np.ndarray
    regularity: float = 2.5
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lengthscales",
                           np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        if not (np.isfinite(self.variance) and self.variance > 0.0):
            raise ValueError("variance must be finite and > 0")
        if np.any(self.lengthscales <= 0.0) or not np.all(np.isfinite(self.lengthscales)):
            raise ValueError("lengthscales must be finite and > 0")
        if self.regularity not in SUPPORTED_REGULARITIES:
            raise ValueError(f"regularity must be one of {SUPPORTED_REGULARITIES}")


def _matern_corr(r, regularity):
    """Unit-variance Matern correlation as a function of scaled distance."""
    r = np.asarray(r, dtype=float)
    if regularity == 0.5:
        return np.exp(-r)
    if regularity == 1.5:
        t = _SQRT3 * r
        return (1.0 + t) * np.exp(-t)
    t = _SQRT5 * r
    return (1.0 + t + (5.0 / 3.0) * r * r) * np.exp(-t)


def _scaled_dists(x, y, lengthscales):
    """Pairwise scaled Euclidean distances between rows of x and rows of y."""
    dx = x[:, None, :] - y[None, :, :]
    return np.sqrt(np.sum((dx / lengthscales) ** 2, axis=2))


def matern_cov(x, y, params):
    """Covariance between two points given in standardized coordinates."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    r = np.sqrt(np.sum(((x - y) / params.lengthscales) ** 2))
    return params.variance * float(_matern_corr(r, params.regularity))


def _chol_with_jitter(corr):
    """Cholesky of corr + jitter*I, escalating jitter until it succeeds.

    Returns (lower factor, jitter used) or raises np.linalg.LinAlgError
    after the escalation range is exhausted.
    """
    jitter = JITTER_START
    eye = np.eye(corr.shape[0])
    while True:
        try:
            L = cholesky(corr + jitter * eye, lower=True)
            return L, jitter
        except np.linalg.LinAlgError:
            if jitter >= JITTER_MAX:
                raise
            jitter *= 10.0


@dataclass
class RemlConfig:
    """Search settings for REML estimation.

    ``n_starts`` counts fresh optimizer starts (the first is moment-based,
    the rest are randomized); a ``warm_start`` parameter set, when given,
    is used as one additional start.
    """

    n_starts: int = 7
    seed: int = 0
    regularity: float = 2.5
    lengthscale_bounds: tuple = (1e-2, 1e2)
    variance_factor_bounds: tuple = (1e-6, 1e6)
    warm_start: CovarianceParams | None = None
    variance_floor: float = 1e-12


def _neg_reml(theta, diffs, y, ones, n, regularity):
    """Negative restricted log-likelihood at theta = (log var, log ells)."""
    log_var = theta[0]
    ells = np.exp(theta[1:])
    var = np.exp(log_var)
    r = np.sqrt(np.sum((diffs / ells) ** 2, axis=2))
    corr = _matern_corr(r, regularity)
    try:
        L, _ = _chol_with_jitter(corr)
    except np.linalg.LinAlgError:
        return 1e25
    logdet_m = 2.0 * float(np.sum(np.log(np.diag(L))))
    b = solve_triangular(L, solve_triangular(L, ones, lower=True), lower=True, trans="T")
    a = solve_triangular(L, solve_triangular(L, y, lower=True), lower=True, trans="T")
    s = float(ones @ b)
    if s <= 0.0:
        return 1e25
    quad = float(y @ a) - float(ones @ a) ** 2 / s
    if quad < 0.0:
        quad = 0.0
    val = 0.5 * ((n - 1) * np.log(2.0 * np.pi) + (n - 1) * log_var
                 + logdet_m + np.log(s) + quad / var)
    return val if np.isfinite(val) else 1e25


def _profiled_variance(ells, diffs, y, ones, n, regularity):
    """Closed-form REML-optimal variance for fixed lengthscales."""
    r = np.sqrt(np.sum((diffs / ells) ** 2, axis=2))
    corr = _matern_corr(r, regularity)
    try:
        L, _ = _chol_with_jitter(corr)
    except np.linalg.LinAlgError:
        return None
    b = solve_triangular(L, solve_triangular(L, ones, lower=True), lower=True, trans="T")
    a = solve_triangular(L, solve_triangular(L, y, lower=True), lower=True, trans="T")
    s = float(ones @ b)
    if s <= 0.0:
        return None
    quad = float(y @ a) - float(ones @ a) ** 2 / s
    if quad <= 0.0:
        return None
    return quad / (n - 1)


def fit_reml(designs, observations, config=None):
    """Estimate Matern covariance parameters by multi-start REML.

    Parameters
    ----------
    designs : ndarray, shape (n, d)
        Design points in standardized coordinates.
    observations : ndarray, shape (n,)
        Noiseless function values; not all equal, or the fit degrades to a
        floor-variance parameter set flagged degenerate.
    config : RemlConfig, optional

    Returns
    -------
    CovarianceParams
    """
    if config is None:
        config = RemlConfig()
    x = np.asarray(designs, dtype=float)
    y = np.asarray(observations, dtype=float).ravel()
    n, d = x.shape
    if y.size != n:
        raise ValueError("designs and observations disagree on n")
    if n < d + 2:
        raise ValueError(f"REML needs at least d + 2 = {d + 2} observations, got {n}")

    var_y = float(np.var(y, ddof=1))
    y_scale = max(1.0, float(np.mean(np.abs(y))) ** 2)
    if var_y <= 1e-300 * y_scale:
        return CovarianceParams(variance=config.variance_floor * y_scale,
                                lengthscales=np.ones(d),
                                regularity=config.regularity,
                                degenerate=True)

    diffs = x[:, None, :] - x[None, :, :]
    ones = np.ones(n)

    lb_ell, ub_ell = config.lengthscale_bounds
    lb_var = var_y * config.variance_factor_bounds[0]
    ub_var = var_y * config.variance_factor_bounds[1]
    bounds = [(np.log(lb_var), np.log(ub_var))] + \
             [(np.log(lb_ell), np.log(ub_ell))] * d

    spread = np.clip(np.std(x, axis=0, ddof=1), 10.0 * lb_ell, 0.1 * ub_ell)
    rng = np.random.default_rng(config.seed)
    starts = []
    if config.warm_start is not None:
        w = config.warm_start
        theta = np.concatenate(([np.log(w.variance)], np.log(w.lengthscales)))
        theta[0] = np.clip(theta[0], *bounds[0])
        theta[1:] = np.clip(theta[1:], np.log(lb_ell), np.log(ub_ell))
        starts.append(theta)
    for k in range(config.n_starts):
        if k == 0:
            ells = spread.copy()
        else:
            ells = spread * np.exp(rng.uniform(np.log(0.1), np.log(10.0), size=d))
            ells = np.clip(ells, lb_ell, ub_ell)
        var0 = _profiled_variance(ells, diffs, y, ones, n, config.regularity)
        if var0 is None:
            var0 = var_y
        var0 = float(np.clip(var0, lb_var, ub_var))
        starts.append(np.concatenate(([np.log(var0)], np.log(ells))))

    best_val = np.inf
    best_theta = None
    for theta0 in starts:
        res = minimize(_neg_reml, theta0, args=(diffs, y, ones, n, config.regularity),
                       method="L-BFGS-B", bounds=bounds)
        if res.fun < best_val and np.all(np.isfinite(res.x)):
            best_val = res.fun
            best_theta = res.x
    if best_theta is None or best_val >= 1e25:
        raise GpFitError("REML search failed: covariance not SPD after jitter escalation")

    return CovarianceParams(variance=float(np.exp(best_theta[0])),
                            lengthscales=np.exp(best_theta[1:]),
                            regularity=config.regularity)


class GpModel:
    """Constant-mean kriging model with fixed covariance parameters.

    Immutable once built: ``add_observation`` returns a new model, so
    read-only prediction is safe to share.  The Cholesky factorization is
    computed once at construction and reused across predictions.

    Parameters
    ----------
    designs : ndarray, shape (n, d)
        Evaluated points in raw coordinates, pairwise distinct up to the
        duplicate tolerance; n >= 2 so the constant mean is identifiable.
    observations : ndarray, shape (n,)
    params : CovarianceParams
    scales : ndarray, shape (d,), optional
        Per-coordinate standardization applied before the kernel; defaults
        to ones.
    """

    def __init__(self, designs, observations, params, scales=None):
        designs = np.array(designs, dtype=float)
        observations = np.array(observations, dtype=float).ravel()
        if designs.ndim != 2:
            raise ValueError("designs must be an (n, d) matrix")
        n, d = designs.shape
        if n < 2:
            raise ValueError("need at least 2 observations for a constant-mean model")
        if observations.size != n:
            raise ValueError("designs and observations disagree on n")
        if scales is None:
            scales = np.ones(d)
        scales = np.asarray(scales, dtype=float)
        if scales.size != d or np.any(scales <= 0):
            raise ValueError("scales must be d positive reals")
        z = designs / scales
        dists = _scaled_dists(z, z, np.ones(d))
        np.fill_diagonal(dists, np.inf)
        if np.min(dists) <= DUPLICATE_TOL:
            raise ValueError("designs contain duplicate rows (within tolerance)")

        self.designs = designs
        self.observations = observations
        self.params = params
        self.scales = scales
        self._z = z
        self._factorize()

    def _factorize(self):
        p = self.params
        r = _scaled_dists(self._z, self._z, p.lengthscales)
        corr = _matern_corr(r, p.regularity)
        try:
            L, jitter = _chol_with_jitter(corr)
        except np.linalg.LinAlgError:
            raise GpFitError("kriging system not SPD after jitter escalation")
        n = self.n
        ones = np.ones(n)
        b = solve_triangular(L, solve_triangular(L, ones, lower=True),
                             lower=True, trans="T")
        s = float(ones @ b)
        if s <= 0.0:
            raise GpPredictError("singular kriging system (1'M^-1 1 <= 0)")
        beta = float(b @ self.observations) / s
        resid = self.observations - beta
        a = solve_triangular(L, solve_triangular(L, resid, lower=True),
                             lower=True, trans="T")
        self._L = L
        self.jitter = jitter * p.variance
        self._b = b
        self._s = s
        self._beta = beta
        self._a = a

    @property
    def n(self):
        return self.designs.shape[0]

    @property
    def dims(self):
        return self.designs.shape[1]

    @property
    def mean_coefficient(self):
        """Generalized least-squares estimate of the constant mean."""
        return self._beta

    def predict(self, x):
        """Kriging posterior mean and variance.

        Observations are noiseless, so queries within the duplicate
        tolerance of a design point return the observed value with zero
        variance exactly; the diagonal jitter is a factorization device
        and its artifacts are removed where the answer is known.

        Parameters
        ----------
        x : ndarray
            A d-vector or an (m, d) batch of prediction points in raw
            coordinates.

        Returns
        -------
        (mean, variance)
            Floats for a single point, (m,) arrays for a batch.  The
            variance is clamped at zero after numerical noise.
        """
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.dims:
            raise ValueError(f"expected points of dimension {self.dims}")
        zq = pts / self.scales
        p = self.params
        r = _scaled_dists(self._z, zq, p.lengthscales)
        c = _matern_corr(r, p.regularity)
        mean = self._beta + c.T @ self._a
        v = solve_triangular(self._L, c, lower=True)
        quad = np.sum(v * v, axis=0)
        u = c.T @ self._b
        var = p.variance * (1.0 - quad + (1.0 - u) ** 2 / self._s)
        var = np.maximum(var, 0.0)
        plain = _scaled_dists(self._z, zq, np.ones(self.dims))
        nearest = np.argmin(plain, axis=0)
        on_design = plain[nearest, np.arange(pts.shape[0])] <= DUPLICATE_TOL
        if np.any(on_design):
            mean = np.where(on_design, self.observations[nearest], mean)
            var = np.where(on_design, 0.0, var)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var

    def duplicates(self, x):
        """Boolean mask of points closer than the tolerance to any design."""
        pts = np.atleast_2d(np.asarray(x, dtype=float)) / self.scales
        d = _scaled_dists(pts, self._z, np.ones(self.dims))
        return np.min(d, axis=1) <= DUPLICATE_TOL

    def add_observation(self, x, y):
        """Return a model extended with one more (point, value) pair.

        The covariance parameters are kept; call ``refit`` afterwards to
        re-estimate them.  A point within the duplicate tolerance of an
        existing design is rejected.
        """
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.dims:
            raise ValueError(f"expected a vector of dimension {self.dims}")
        if bool(self.duplicates(x)[0]):
            raise DuplicatePointError(f"point {x.tolist()} duplicates an existing design")
        designs = np.vstack([self.designs, x])
        observations = np.append(self.observations, float(y))
        return GpModel(designs, observations, self.params, self.scales)

    def refit(self, n_starts=1, seed=0):
        """Re-estimate covariance parameters, warm-started at the current ones."""
        cfg = RemlConfig(n_starts=n_starts, seed=seed,
                         regularity=self.params.regularity,
                         warm_start=self.params)
        params = fit_reml(self._z, self.observations, cfg)
        return GpModel(self.designs, self.observations, params, self.scales)

    def to_dict(self):
        return {
            "designs": self.designs.tolist(),
            "observations": self.observations.tolist(),
            "params": {
                "variance": self.params.variance,
                "lengthscales": self.params.lengthscales.tolist(),
                "regularity": self.params.regularity,
                "degenerate": self.params.degenerate,
            },
            "scales": self.scales.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        p = doc["params"]
        params = CovarianceParams(variance=p["variance"],
                                  lengthscales=np.asarray(p["lengthscales"]),
                                  regularity=p["regularity"],
                                  degenerate=p.get("degenerate", False))
        return cls(np.asarray(doc["designs"]), np.asarray(doc["observations"]),
                   params, np.asarray(doc["scales"]))

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_model(designs, observations, input_dist=None, regularity=2.5,
                n_starts=7, seed=0):
    """Fit covariance parameters by REML and assemble a model.

    ``input_dist``, when given, supplies the standardization scales (its
    marginal standard deviations).
    """
    designs = np.asarray(designs, dtype=float)
    scales = input_dist.sds if input_dist is not None else np.ones(designs.shape[1])
    cfg = RemlConfig(n_starts=n_starts, seed=seed, regularity=regularity)
    params = fit_reml(designs / scales, observations, cfg)
    return GpModel(designs, observations, params, scales)
