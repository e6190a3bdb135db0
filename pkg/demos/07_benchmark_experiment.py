"""Replicated experiments through the benchmark harness.

An experiment bundles a problem, a method and a replication count; every
replication gets a seed derived from the master seed by a stable hash, so
reruns are byte-identical.  Artifacts land in the output directory as
summary.json, runs.csv and stages.csv.  The same run is available from
the command line:

    raresim run --config my.cfg --out results/
"""

import json
import pathlib
import tempfile

from raresim import ExperimentConfig, run_experiment

out = pathlib.Path(tempfile.mkdtemp(prefix="raresim_demo_"))

config = ExperimentConfig(problem="cantilever", method="subsim",
                          m=1000, p0=0.1, replications=10, seed=2026,
                          reference=3.85e-5)
stats = run_experiment(config, out, jobs=1)

print(f"replications: {stats.n_runs} (failures: {stats.failures})")
print(f"mean estimate: {stats.mean:.4e}")
print(f"sample sd:     {stats.sd:.4e}")
print(f"kappa (relative bias vs reference): {stats.kappa:.1%}")
print(f"cov  (sd / reference):              {stats.cov:.1%}")
print("artifacts:", sorted(p.name for p in out.iterdir()))

summary = json.loads((out / "summary.json").read_text())
print("first run record:", {k: summary["runs"][0][k]
                            for k in ("rep", "estimate", "total_evaluations")})
