"""The particle engine: reweight, multinomial resample, Metropolis moves.

The sequential estimator advances a particle cloud through a sequence of
smoothed conditional densities.  Weights are ratios of consecutive
excursion probabilities, and their mean is the stage's contribution to
the product estimator.
"""

import numpy as np

from raresim import (MoveConfig, ParticlePopulation, compute_weights,
                     multinomial_resample, mwg_move)

rng = np.random.default_rng(11)
m = 5000

# weights from made-up consecutive excursion probabilities
g_prev = rng.uniform(0.2, 1.0, size=m)
g_next = g_prev * rng.uniform(0.0, 1.0, size=m)
weights, factor = compute_weights(g_next, g_prev)
print(f"stage factor (mean ratio): {factor:.4f}")
print(f"effective sample size: {1.0 / np.sum(weights ** 2):.0f} of {m}")

# resampling duplicates heavy particles and drops light ones
pop = ParticlePopulation(rng.standard_normal((m, 2)), weights)
resampled = multinomial_resample(pop, rng)
unique = len(np.unique(resampled.points[:, 0]))
print(f"distinct particles after multinomial resampling: {unique} of {m}")

# Metropolis-within-Gibbs sweeps restore diversity; the standard normal
# target is left invariant, so moments stay put while duplicates break up
target = lambda x: -0.5 * np.sum(x * x, axis=1)
moved = mwg_move(resampled, target, MoveConfig([1.0, 1.0], sweeps=5), rng)
unique_after = len(np.unique(moved.points[:, 0]))
print(f"distinct particles after 5 sweeps: {unique_after} of {m}")
print("coordinate means after moving:", np.round(moved.points.mean(axis=0), 3))
print("coordinate variances after moving:",
      np.round(moved.points.var(axis=0), 3))
