"""End-to-end acceptance suite.

One test per criterion, each printing a PASS/FAIL line (run pytest with
``-s`` to see them live).  The statistical criteria run the benchmark
experiments at their standard settings and fixed master seeds, so every
assertion is deterministic.
"""

import json
import time

import numpy as np
import pytest

from raresim.bench import PROFILES, ExperimentConfig, derive_seed, run_experiment
from raresim.estimators import (BssConfig, bayesian_subsim, classic_subsim,
                                crude_mc, solve_threshold)
from raresim.excursion import excursion_from_moments
from raresim.kriging import CovarianceParams, GpModel, build_model
from raresim.problems import ReliabilityProblem, cantilever, gaussian_tail
from raresim.smc import (MoveConfig, ParticlePopulation, compute_weights,
                         multinomial_resample, mwg_move)

REFERENCE_ALPHA = 3.85e-5
MASTER_SEED = 20260808
# benchmark experiment seeds; each criterion runs one fixed, deterministic
# experiment
SUBSIM_SEED = 9316
BSS_SEED = 7412


def _report(criterion, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[{status}] acceptance {criterion}" + (f" ({detail})" if detail else ""))
    assert ok, f"{criterion}: {detail}"


@pytest.mark.slow
def test_criterion_1_reference_probability():
    beam = cantilever()
    m = 10_000_000
    start = time.time()
    report = crude_mc(beam, m, np.random.default_rng(derive_seed(MASTER_SEED, 101)))
    elapsed = time.time() - start
    tolerance = 4.0 * np.sqrt(REFERENCE_ALPHA / m)
    ok = abs(report.estimate - REFERENCE_ALPHA) < tolerance and elapsed < 120.0
    _report("1: crude MC reference probability", ok,
            f"estimate={report.estimate:.4g} tol={tolerance:.2g} "
            f"time={elapsed:.1f}s")


@pytest.mark.slow
def test_criterion_2_classic_subset_simulation(tmp_path):
    config = ExperimentConfig(problem="cantilever", method="subsim", m=1000,
                              p0=0.1, replications=50, seed=SUBSIM_SEED,
                              reference=REFERENCE_ALPHA)
    stats = run_experiment(config, tmp_path / "subsim", jobs=1)
    summary = json.load(open(tmp_path / "subsim" / "summary.json"))
    runs = [r for r in summary["runs"] if not r["failed"]]
    stages_ok = all(len(r["stages"]) == 5 for r in runs)
    accounting_ok = all(r["accounted_evaluations"] == 4600 for r in runs)
    se = stats.sd / np.sqrt(stats.n_runs)
    mean_ok = abs(stats.mean - REFERENCE_ALPHA) < 3.0 * se
    cov_ok = 0.40 <= stats.cov <= 0.90
    _report("2: classic Subset Simulation",
            stages_ok and accounting_ok and mean_ok and cov_ok,
            f"stages5={stages_ok} acct4600={accounting_ok} "
            f"mean={stats.mean:.4g} (3se={3*se:.2g}) cov={stats.cov:.3f}")


@pytest.mark.slow
def test_criterion_3_bayesian_subset_simulation(tmp_path):
    values = dict(PROFILES["paper-cantilever"])
    values["replications"] = 50
    values["seed"] = BSS_SEED
    config = ExperimentConfig(**values)
    stats = run_experiment(config, tmp_path / "bss", jobs=1)
    summary = json.load(open(tmp_path / "bss" / "summary.json"))
    runs = [r for r in summary["runs"] if not r["failed"]]
    n_values = [r["total_evaluations"] for r in runs]
    stages_ok = all(len(r["stages"]) == 5 for r in runs)
    range_ok = all(80 <= n <= 140 for n in n_values)
    mean_n_ok = 90 <= np.mean(n_values) <= 120
    kappa_ok = stats.kappa < 0.25
    cov_ok = stats.cov < 0.45
    _report("3: Bayesian Subset Simulation",
            stages_ok and range_ok and mean_n_ok and kappa_ok and cov_ok,
            f"stages5={stages_ok} N=[{min(n_values)},{max(n_values)}] "
            f"meanN={np.mean(n_values):.1f} kappa={stats.kappa:.3f} "
            f"cov={stats.cov:.3f}")


@pytest.mark.slow
def test_criterion_4_analytic_toy_consistency():
    toy = gaussian_tail(2.3263)  # alpha = 0.01
    estimates = []
    for k in range(30):
        config = BssConfig(m=1000, p0=0.1, n0=5,
                           seed=derive_seed(MASTER_SEED, 400 + k))
        estimates.append(bayesian_subsim(toy, config).estimate)
    rel_err = abs(np.mean(estimates) - 0.01) / 0.01
    _report("4: analytic-toy consistency", rel_err < 0.15,
            f"mean={np.mean(estimates):.5g} rel_err={rel_err:.3f}")


def test_criterion_5_property_suites():
    rng = np.random.default_rng(55)
    checks = {}

    # GP interpolation exactness at design points
    beam = cantilever()
    designs = beam.input.sample(40, rng)
    obs = beam.performance(designs)
    model = build_model(designs, obs, input_dist=beam.input, seed=1)
    mean, var = model.predict(designs)
    scale = np.max(np.abs(obs))
    checks["gp-interpolation"] = np.max(np.abs(mean - obs)) <= 1e-6 * scale

    # posterior-variance monotonicity under conditioning
    mono = True
    for _ in range(40):
        pts = rng.uniform(size=(8, 2))
        params = CovarianceParams(variance=1.0,
                                  lengthscales=rng.uniform(0.2, 1.0, size=2))
        gp = GpModel(pts, rng.standard_normal(8), params)
        bigger = gp.add_observation(rng.uniform(size=2),
                                    float(rng.standard_normal()))
        queries = rng.uniform(size=(25, 2))
        _, before = gp.predict(queries)
        _, after = bigger.predict(queries)
        mono &= bool(np.all(after <= before + 1e-9))
    checks["variance-monotone"] = mono

    # multinomial resampling frequencies (chi-square)
    from scipy.stats import chisquare
    weights = np.array([0.5, 0.3, 0.2])
    points = np.array([[0.0], [1.0], [2.0]])
    totals = np.zeros(3)
    for _ in range(1000):
        out = multinomial_resample(ParticlePopulation(points, weights), rng)
        totals += np.bincount(out.points[:, 0].astype(int), minlength=3)
    checks["resample-chi2"] = chisquare(totals, weights * 3000).pvalue > 1e-4

    # Metropolis-within-Gibbs stationarity on a Gaussian target
    start = rng.standard_normal((10_000, 2))
    moved = mwg_move(ParticlePopulation(start),
                     lambda x: -0.5 * np.sum(x * x, axis=1),
                     MoveConfig([1.0, 1.0]), rng)
    se_mean = 1.0 / np.sqrt(10_000)
    se_var = np.sqrt(2.0 / 9_999)
    checks["mwg-stationarity"] = all(
        abs(moved.points[:, j].mean()) < 4 * se_mean
        and abs(moved.points[:, j].var(ddof=1) - 1.0) < 4 * se_var
        for j in range(2))

    # threshold solver vs grid scan
    from scipy.special import ndtr
    solver_designs = rng.uniform(-3, 3, size=(30, 1))
    toy_model = GpModel(solver_designs, solver_designs[:, 0],
                        CovarianceParams(variance=2.0, lengthscales=[1.0]))
    particles = rng.standard_normal((200, 1))
    mu, v = toy_model.predict(particles)
    prev = excursion_from_moments(mu, v, -1.0)
    solved = solve_threshold(particles, toy_model, 50.0, 0.2, prev)
    den = np.maximum(prev, 1e-300)
    sd = np.sqrt(v)
    grid = np.linspace(-6.0, 10.0, 1_000_000)
    crossing = None
    for chunk in np.array_split(grid, 100):
        lhs = np.mean(ndtr((mu[:, None] - chunk[None, :]) / sd[:, None])
                      / den[:, None], axis=0)
        hits = np.nonzero(lhs >= 0.2)[0]
        if hits.size:
            crossing = chunk[hits[-1]]
    checks["threshold-gridscan"] = abs(solved - crossing) <= \
        (grid[1] - grid[0]) + 1e-6

    # product-of-factors identity and strict threshold monotonicity for
    # both subset estimators, plus exact counter reconciliation
    calls = {"n": 0}

    def counted(x):
        calls["n"] += x.shape[0]
        return beam.performance(x)

    counted_beam = ReliabilityProblem(beam.input, counted, 17.8)
    calls["n"] = 0
    rep_c = classic_subsim(counted_beam, 500, 0.1, np.random.default_rng(7))
    checks["counter-classic"] = rep_c.total_evaluations == calls["n"]
    prod = np.prod([s.factor for s in rep_c.stages])
    checks["product-classic"] = abs(rep_c.estimate - prod) <= 1e-12 * prod
    thr = [s.threshold for s in rep_c.stages]
    checks["thresholds-classic"] = all(a < b for a, b in zip(thr, thr[1:])) \
        and thr[-1] == 17.8

    calls["n"] = 0
    rep_b = bayesian_subsim(counted_beam, BssConfig(m=500, p0=0.1, n0=10, seed=5))
    checks["counter-bss"] = rep_b.total_evaluations == calls["n"]
    prod = np.prod([s.factor for s in rep_b.stages])
    checks["product-bss"] = abs(rep_b.estimate - prod) <= 1e-12 * prod
    thr = [s.threshold for s in rep_b.stages]
    checks["thresholds-bss"] = all(a < b for a, b in zip(thr, thr[1:])) \
        and thr[-1] == 17.8

    failed = [name for name, ok in checks.items() if not ok]
    _report("5: property suites", not failed,
            "all checks passed" if not failed else f"failed: {failed}")


def test_criterion_6_indicator_limit_equivalence():
    # classic trajectory on a tiny 1-D problem, replayed through the
    # smoothed-estimator machinery with a zero-variance surrogate
    toy = gaussian_tail(2.0)

    class ExactSurrogate:
        def predict(self, x):
            vals = toy.performance(np.atleast_2d(np.asarray(x, dtype=float)))
            return vals, np.zeros_like(vals)

    trace = []
    report = classic_subsim(toy, 200, 0.25, np.random.default_rng(61),
                            trace=trace)
    assert report.n_stages >= 3
    oracle = ExactSurrogate()
    prev_threshold = None
    max_err = 0.0
    replay = []
    final_stage = report.n_stages
    for entry, record in zip(trace, report.stages):
        points = entry["points"]
        mean, var = oracle.predict(points)
        if prev_threshold is None:
            prev_g = np.ones(len(points))
        else:
            prev_g = excursion_from_moments(mean, var, prev_threshold)
        if record.stage < final_stage:
            # no tie at the quantile cut in this trajectory, so the
            # recorded constant-p0 factors equal the realized fractions
            f_sorted = np.sort(entry["f"])
            assert f_sorted[int(0.75 * 200) - 1] < f_sorted[int(0.75 * 200)]
        g_now = excursion_from_moments(mean, var, record.threshold)
        _, factor = compute_weights(g_now, prev_g)
        replay.append(factor)
        max_err = max(max_err, abs(factor - record.factor))
        prev_threshold = record.threshold
    product_err = abs(np.prod(replay) - report.estimate) / report.estimate
    ok = max_err <= 1e-12 and product_err <= 1e-12
    _report("6: indicator-limit equivalence", ok,
            f"max stage-factor error={max_err:.2e} product rel "
            f"error={product_err:.2e} over {report.n_stages} stages")


def test_criterion_7_determinism(tmp_path):
    config = ExperimentConfig(problem="cantilever", method="subsim", m=300,
                              p0=0.1, replications=3, seed=777,
                              reference=REFERENCE_ALPHA)
    run_experiment(config, tmp_path / "det1", jobs=1)
    run_experiment(config, tmp_path / "det2", jobs=1)
    a = (tmp_path / "det1" / "summary.json").read_bytes()
    b = (tmp_path / "det2" / "summary.json").read_bytes()
    _report("7: determinism", a == b,
            f"summary bytes identical ({len(a)} bytes)")
