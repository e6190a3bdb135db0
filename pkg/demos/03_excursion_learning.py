"""Excursion probabilities, misclassification, and the adaptive learning loop.

For a threshold u, the posterior probability that the performance exceeds
u at x is Phi((mean - u) / sd).  The misclassification min(g, 1 - g) is
largest where the model is unsure which side of the threshold x falls on;
the learning loop evaluates the worst such point, updates the model, and
stops once the cloud's mean misclassification drops below a tolerance.
"""

import numpy as np

from raresim import (ExcursionQuery, build_model, excursion_prob, gaussian_tail,
                     maximin_doe, misclassification, run_stage_learning)

toy = gaussian_tail()  # f(x) = x with standard normal input
rng = np.random.default_rng(3)

cloud = toy.input.sample(500, rng)
designs = maximin_doe(cloud, 5, scale=toy.input.sds)
model = build_model(designs, toy.performance(designs),
                    input_dist=toy.input, seed=0)

threshold = 1.0
query = ExcursionQuery(model, threshold)
g = excursion_prob(query, cloud)
tau = misclassification(query, cloud)
print(f"before learning: mean excursion prob {g.mean():.4f}, "
      f"mean misclassification {tau.mean():.2e}")

model, n_evals, mean_tau = run_stage_learning(
    model, toy, threshold, cloud, eta=1e-6, budget=50, rng=rng)
print(f"learning spent {n_evals} evaluations; "
      f"mean misclassification now {mean_tau:.2e}")

query = ExcursionQuery(model, threshold)
g = excursion_prob(query, cloud)
print(f"smoothed failure estimate over the cloud: {g.mean():.4f} "
      f"(exact tail probability 0.1587)")
