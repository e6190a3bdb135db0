"""Particle-population bookkeeping: reweight, resample, move.

The move kernel is a fixed-scan Metropolis-within-Gibbs sweep with a
Gaussian random-walk proposal per coordinate.  Operations are vectorized
across particles (they are conditionally independent given the target),
with a single generator stream so runs replay exactly from the seed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePopulationError

# Floor applied to weight-ratio denominators so a particle whose previous
# excursion probability underflowed to zero yields ratio 0, not 0/0.
DENOMINATOR_FLOOR = 1e-300

WEIGHT_NORMALIZATION_TOL = 1e-12


@dataclass
class ParticlePopulation:
    """m weighted points in the input space.

    Weights are normalized at construction and must be finite and
    nonnegative; ``stage`` tags which density of the target sequence the
    population currently represents.
    """

    points: np.ndarray
    weights: np.ndarray = None
    stage: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        m = self.points.shape[0]
        if m < 2:
            raise ValueError("population needs at least 2 particles")
        if self.weights is None:
            self.weights = np.full(m, 1.0 / m)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.size != m:
                raise ValueError("weights length must match the number of points")
            if not np.all(np.isfinite(w)) or np.any(w < 0.0):
                raise ValueError("weights must be finite and nonnegative")
            total = w.sum()
            if total <= 0.0:
                raise DegeneratePopulationError("all particle weights are zero")
            if abs(total - 1.0) > WEIGHT_NORMALIZATION_TOL:
                w = w / total
            self.weights = w

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def dims(self):
        return self.points.shape[1]


@dataclass
class MoveConfig:
    """Random-walk proposal scales and number of full coordinate sweeps."""

    proposal_sds: np.ndarray
    sweeps: int = 1

    def __post_init__(self):
        self.proposal_sds = np.atleast_1d(np.asarray(self.proposal_sds, dtype=float))
        if np.any(self.proposal_sds <= 0.0) or not np.all(np.isfinite(self.proposal_sds)):
            raise ValueError("proposal_sds must be finite and > 0")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")


def compute_weights(g_num, g_den):
    """Importance ratios between consecutive excursion probabilities.

    Parameters
    ----------
    g_num, g_den : ndarray, shape (m,)
        Excursion probabilities at the current and previous thresholds;
        denominators live in [0, 1].

    Returns
    -------
    (weights, factor)
        Normalized weights and the stage factor, i.e. the mean raw ratio
        contributing one term of the product estimator.
    """
    g_num = np.asarray(g_num, dtype=float).ravel()
    g_den = np.asarray(g_den, dtype=float).ravel()
    if g_num.shape != g_den.shape:
        raise ValueError("g_num and g_den must have the same length")
    if np.any(g_den < 0.0) or np.any(g_den > 1.0):
        raise ValueError("g_den entries must lie in [0, 1]")
    ratios = g_num / np.maximum(g_den, DENOMINATOR_FLOOR)
    total = ratios.sum()
    if total <= 0.0:
        raise DegeneratePopulationError("all weight ratios are zero")
    factor = float(np.mean(ratios))
    return ratios / total, factor


def multinomial_indices(weights, n, rng):
    """n independent index draws with probabilities given by the weights."""
    weights = np.asarray(weights, dtype=float)
    return rng.choice(weights.size, size=n, replace=True, p=weights / weights.sum())


def multinomial_resample(pop, rng):
    """Draw m particles with replacement by weight; output weights are uniform."""
    idx = multinomial_indices(pop.weights, pop.size, rng)
    return ParticlePopulation(pop.points[idx].copy(), None, stage=pop.stage)


def _mwg_scan(points, logp, target_logdensity, config, rng, aux=None):
    """Fixed-scan Metropolis-within-Gibbs sweeps, vectorized over particles.

    ``aux``, when given, is an array of per-particle values returned by the
    target alongside the log density (the target must then return a pair);
    it is carried through the accept masks so callers can track cached
    quantities such as performance values.
    """
    points = points.copy()
    logp = logp.copy()
    m, d = points.shape
    returns_aux = aux is not None
    if returns_aux:
        aux = aux.copy()
    for _ in range(config.sweeps):
        for j in range(d):
            proposal = points.copy()
            proposal[:, j] += config.proposal_sds[j] * rng.standard_normal(m)
            if returns_aux:
                logq, aux_q = target_logdensity(proposal)
            else:
                logq = target_logdensity(proposal)
            logq = np.asarray(logq, dtype=float)
            logq = np.where(np.isnan(logq), -np.inf, logq)
            with np.errstate(invalid="ignore", divide="ignore"):
                accept = np.log(rng.uniform(size=m)) < (logq - logp)
            accept &= logq > -np.inf
            points[accept] = proposal[accept]
            logp[accept] = logq[accept]
            if returns_aux:
                aux[accept] = np.asarray(aux_q)[accept]
    if returns_aux:
        return points, logp, aux
    return points, logp


def mwg_move(pop, target_logdensity, config, rng, current_logdensity=None):
    """Move every particle by Metropolis-within-Gibbs sweeps on the target.

    Coordinates are cycled in their natural order; each proposal perturbs
    one coordinate by a centered Gaussian step and is accepted with
    probability ``min(1, exp(delta log density))``.  A NaN target value at
    a proposal counts as log density -inf (rejection).

    Parameters
    ----------
    pop : ParticlePopulation
    target_logdensity : callable
        Vectorized map from (m, d) points to (m,) log densities; must be
        finite at every current particle.
    config : MoveConfig
    rng : numpy Generator
    current_logdensity : ndarray, optional
        Log densities at the current points, if the caller already has
        them; computed from the target otherwise.

    Returns
    -------
    ParticlePopulation
        Same size and weights, moved points.
    """
    if config.proposal_sds.size != pop.dims:
        raise ValueError("proposal_sds dimension must match the particles")
    if current_logdensity is None:
        logp = np.asarray(target_logdensity(pop.points), dtype=float)
    else:
        logp = np.asarray(current_logdensity, dtype=float).copy()
    if logp.shape != (pop.size,):
        raise ValueError("log density must be one value per particle")
    if not np.all(np.isfinite(logp)):
        raise ValueError("target log density must be finite at every current particle")
    points, _ = _mwg_scan(pop.points, logp, target_logdensity, config, rng)
    return ParticlePopulation(points, pop.weights.copy(), stage=pop.stage)
