"""Fit the kriging surrogate to a handful of performance evaluations.

The model has a constant unknown mean and an anisotropic Matern-5/2
covariance; its parameters are estimated by multi-start REML.  Inputs are
standardized by the input distribution's standard deviations before they
enter the kernel, which matters here because the two coordinates differ
by six orders of magnitude.
"""

import numpy as np

from raresim import GpModel, build_model, cantilever, maximin_doe

beam = cantilever()
rng = np.random.default_rng(7)

# space-filling initial design drawn from a Monte Carlo cloud
cloud = beam.input.sample(1000, rng)
designs = maximin_doe(cloud, 12, scale=beam.input.sds)
values = beam.performance(designs)
model = build_model(designs, values, input_dist=beam.input, seed=0)

print("fitted variance:", round(model.params.variance, 3))
print("fitted lengthscales (standardized units):",
      np.round(model.params.lengthscales, 3))

# noiseless kriging interpolates its data exactly
mean_at_designs, var_at_designs = model.predict(designs)
print("max |prediction - observation| at designs:",
      float(np.max(np.abs(mean_at_designs - values))))
print("max variance at designs:", float(np.max(var_at_designs)))

# predictions away from the data carry useful uncertainty
queries = beam.input.sample(5, rng)
mean, var = model.predict(queries)
truth = beam.performance(queries)
for q, mu, sd, f in zip(queries, mean, np.sqrt(var), truth):
    print(f"x = ({q[0]:.5f}, {q[1]:7.2f})  predicted {mu:8.3f} +- {sd:6.3f}"
          f"   true {f:8.3f}")

# adding an observation conditions the model; the state round-trips
# through JSON for resumable experiments
extended = model.add_observation(queries[0], truth[0])
print("n before/after add_observation:", model.n, extended.n)
restored = GpModel.from_json(extended.to_json())
print("serialization round-trip matches:",
      np.allclose(restored.predict(queries)[0], extended.predict(queries)[0]))
