"""Define the cantilever-beam reliability problem and estimate its failure
probability by plain Monte Carlo.

Failure is a tip deviation above 17.8; with the inputs of the built-in
case this happens with probability around 3.85e-5, so crude sampling
needs millions of evaluations to see a useful number of failures.
"""

import numpy as np

from raresim import cantilever, crude_mc, eval_performance, input_logpdf

beam = cantilever()
print("problem:", beam)
print("input means:", beam.input.means, " sds:", beam.input.sds)

# a few pointwise evaluations
for x in ([0.001, 250.0], [0.0015, 200.0], [0.002, 180.0]):
    print(f"f({x[0]:.4g}, {x[1]:.4g}) = {eval_performance(beam, x):.5f}")
print("log input density at the mean point:",
      round(input_logpdf(beam.input, [0.001, 250.0]), 4))

# crude Monte Carlo at increasing sample sizes; the binomial standard
# error shows why this gets expensive for rare events
rng = np.random.default_rng(2026)
for m in (10_000, 100_000, 1_000_000):
    report = crude_mc(beam, m, rng)
    se = np.sqrt(max(report.estimate, 1e-12) * (1 - report.estimate) / m)
    print(f"m = {m:>9,d}: estimate = {report.estimate:.3e} "
          f"(binomial se ~ {se:.1e}), evaluations = {report.total_evaluations:,d}")

print("reference value from a long run: 3.85e-05")
