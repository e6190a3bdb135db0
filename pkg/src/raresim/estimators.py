"""Failure-probability estimators: crude Monte Carlo, Subset Simulation with
adaptive levels, and the kriging-based Bayesian variant.

All three report the estimate as a product of per-stage factors together
with a per-run evaluation count read off the performance counter.  The
Bayesian estimator replaces indicator functions with posterior excursion
probabilities, so its resample/move machinery runs on model predictions
alone; the performance function is only touched by the initial design and
the per-stage learning loop.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (DegenerateModelError, DegeneratePopulationError,
                     NonConvergenceError)
from .excursion import (excursion_from_moments, log_excursion_from_moments,
                        run_stage_learning)
from .kriging import build_model
from .problems import PerformanceCounter
from .smc import (DENOMINATOR_FLOOR, MoveConfig, ParticlePopulation,
                  compute_weights, multinomial_indices, mwg_move)


@dataclass
class BssConfig:
    """Settings of the Bayesian subset estimator.

    ``eta_intermediate`` bounds the mean misclassification at intermediate
    stages, ``eta_final`` (at most as large) at the final stage.  The
    initial design size ``n0`` must be at least d + 2 for the problem at
    hand so the constant-mean model is identifiable.
    """

    m: int = 1000
    p0: float = 0.1
    n0: int = 10
    eta_intermediate: float = 1e-6
    eta_final: float = 1e-7
    stage_budget: int = 100
    max_stages: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie in (0, 1)")
        if self.eta_final > self.eta_intermediate:
            raise ValueError("eta_final must be <= eta_intermediate")
        if self.eta_final <= 0.0:
            raise ValueError("eta values must be > 0")
        if self.m < 2 or self.n0 < 2:
            raise ValueError("m and n0 must be >= 2")
        if self.stage_budget < 1 or self.max_stages < 1:
            raise ValueError("stage_budget and max_stages must be >= 1")


@dataclass
class StageRecord:
    """One stage's threshold, product factor, and evaluation count."""

    stage: int
    threshold: float
    factor: float
    evaluations: int
    mean_misclassification: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.factor <= 1.0:
            raise ValueError("stage factor must lie in [0, 1]")
        if self.evaluations < 0:
            raise ValueError("evaluations must be >= 0")

    def to_dict(self):
        return {"t": self.stage, "u_t": self.threshold, "factor": self.factor,
                "N_t": self.evaluations,
                "mean_tau": self.mean_misclassification}


@dataclass
class EstimateReport:
    """Point estimate with per-stage records and evaluation accounting.

    ``total_evaluations`` is the performance counter's exact total.  For
    Subset Simulation, ``accounted_evaluations`` additionally reports the
    conventional arithmetic of one evaluation per regenerated particle and
    stage; the true counter runs slightly below it because candidates with
    every coordinate pre-rejected cost nothing.
    """

    estimate: float
    stages: list
    total_evaluations: int
    method: str
    seed: int | None = None
    initial_design_evaluations: int = 0
    accounted_evaluations: int | None = None
    trace: list | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.estimate < 0.0:
            raise ValueError("estimate must be >= 0")

    @property
    def n_stages(self):
        return len(self.stages)

    def to_dict(self):
        return {
            "method": self.method,
            "estimate": self.estimate,
            "seed": self.seed,
            "total_evaluations": self.total_evaluations,
            "initial_design_evaluations": self.initial_design_evaluations,
            "accounted_evaluations": self.accounted_evaluations,
            "stages": [s.to_dict() for s in self.stages],
        }


def crude_mc(problem, m, rng, seed=None, chunk_size=1_000_000):
    """Plain Monte Carlo estimate: fraction of i.i.d. samples in failure."""
    if m < 1:
        raise ValueError("m must be >= 1")
    counter = PerformanceCounter(problem)
    u = problem.failure_threshold
    hits = 0
    remaining = int(m)
    while remaining > 0:
        n = min(chunk_size, remaining)
        x = problem.input.sample(n, rng)
        hits += int(np.count_nonzero(counter.evaluate(x) > u))
        remaining -= n
    estimate = hits / m
    stage = StageRecord(1, u, estimate, counter.count)
    return EstimateReport(estimate=estimate, stages=[stage],
                          total_evaluations=counter.count, method="mc",
                          seed=seed, accounted_evaluations=counter.count)


def maximin_doe(candidates, n0, scale=None):
    """Greedy maximin subset of a candidate cloud, in selection order.

    Starts from the pair of candidates at maximum distance, then keeps
    appending the candidate whose minimum distance to the points already
    chosen is largest (ties to the lowest index).  Distances are Euclidean
    after dividing coordinates by ``scale`` when given.
    """
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    m = cand.shape[0]
    if n0 < 2:
        raise ValueError("n0 must be >= 2")
    if m < n0:
        raise ValueError(f"need at least n0 = {n0} candidates, got {m}")
    z = cand / np.asarray(scale, dtype=float) if scale is not None else cand
    dists = np.sqrt(np.sum((z[:, None, :] - z[None, :, :]) ** 2, axis=2))
    flat = int(np.argmax(dists))
    first, second = flat // m, flat % m
    chosen = [first, second]
    min_dist = np.minimum(dists[:, first], dists[:, second])
    min_dist[chosen] = -np.inf
    while len(chosen) < n0:
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        min_dist = np.minimum(min_dist, dists[:, nxt])
        min_dist[nxt] = -np.inf
    return cand[chosen]


def solve_threshold(particles, model, u_final, p0, prev_g):
    """Threshold at which the mean excursion-probability ratio equals p0.

    Solves ``mean_i g(Y_i; u) / prev_g_i = p0`` for u by bisection, with
    predictions at the particles computed once.  Returns ``u_final`` when
    the left-hand side there is already >= p0 (final stage reached), and
    otherwise a value below it, located to an absolute tolerance of
    1e-9 times the value scale (the larger of 1, |u_final| and the
    bracket width).
    """
    particles = np.atleast_2d(np.asarray(particles, dtype=float))
    prev_g = np.asarray(prev_g, dtype=float).ravel()
    if np.any(prev_g < 0.0) or np.any(prev_g > 1.0):
        raise ValueError("prev_g entries must lie in [0, 1]")
    if np.all(prev_g < DENOMINATOR_FLOOR):
        raise ValueError("prev_g entries are all below the denominator floor")
    mean, var = model.predict(particles)
    den = np.maximum(prev_g, DENOMINATOR_FLOOR)

    def lhs(u):
        return float(np.mean(excursion_from_moments(mean, var, u) / den))

    if lhs(u_final) >= p0:
        return float(u_final)

    sd = np.sqrt(var)
    lo = float(np.min(mean - 40.0 * sd))
    span = max(float(u_final) - lo, 1.0)
    for _ in range(64):
        if lhs(lo) >= p0:
            break
        lo -= span
        span *= 2.0
    else:
        raise DegenerateModelError(
            "threshold equation stays below p0 on the whole bracket")
    hi = float(u_final)
    tol = 1e-9 * max(1.0, abs(float(u_final)), hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if lhs(mid) >= p0:
            lo = mid
        else:
            hi = mid
    return lo


def _modified_metropolis_step(points, f_vals, dist, threshold, move_config,
                              rng, counter):
    """One component-wise Metropolis step of the conditional level sampler.

    Each coordinate of the composite candidate is pre-accepted on its 1-D
    marginal input-density ratio without touching the performance
    function; the candidate then costs a single performance evaluation and
    falls back to the current point when its value is not above the
    threshold.  Particles whose candidate equals the current point skip
    the evaluation.
    """
    points = points.copy()
    f_vals = f_vals.copy()
    m, d = points.shape
    candidate = points.copy()
    for j in range(d):
        proposed = points[:, j] + move_config.proposal_sds[j] * rng.standard_normal(m)
        z_new = (proposed - dist.means[j]) / dist.sds[j]
        z_old = (points[:, j] - dist.means[j]) / dist.sds[j]
        log_ratio = 0.5 * (z_old * z_old - z_new * z_new)
        accept = np.log(rng.uniform(size=m)) < log_ratio
        candidate[accept, j] = proposed[accept]
    moved = np.any(candidate != points, axis=1)
    if np.any(moved):
        f_candidate = counter.evaluate(candidate[moved])
        keep = f_candidate > threshold
        rows = np.nonzero(moved)[0][keep]
        points[rows] = candidate[moved][keep]
        f_vals[rows] = f_candidate[keep]
    return points, f_vals


def _regenerate_level(points, f_vals, mask, dist, threshold, move_config, rng,
                      counter, m):
    """Rebuild a size-m level population from the survivors by seed chains.

    Survivors are kept as chain heads; the remaining m - n_s states are
    produced by running the component-wise Metropolis kernel along each
    chain, lengths balanced to within one state.  Each chain step costs at
    most one performance evaluation, so a stage costs at most m - n_s.
    """
    seeds = points[mask]
    seed_f = f_vals[mask]
    n_s = seeds.shape[0]
    order = rng.permutation(n_s)
    seeds = seeds[order]
    seed_f = seed_f[order]
    base, extra = divmod(m, n_s)
    lengths = np.full(n_s, base)
    lengths[:extra] += 1

    out_pts = [seeds]
    out_f = [seed_f]
    current = seeds
    current_f = seed_f
    produced = np.ones(n_s, dtype=int)
    for _ in range(int(lengths.max()) - 1):
        active = produced < lengths
        nxt, nxt_f = _modified_metropolis_step(
            current[active], current_f[active], dist, threshold, move_config,
            rng, counter)
        current = current.copy()
        current_f = current_f.copy()
        current[active] = nxt
        current_f[active] = nxt_f
        out_pts.append(current[active])
        out_f.append(current_f[active])
        produced[active] += 1
    return np.vstack(out_pts), np.concatenate(out_f)


def classic_subsim(problem, m, p0, rng, move_config=None, seed=None,
                   max_stages=50, trace=None):
    """Subset Simulation with adaptive levels at conditional probability p0.

    Stage 1 is a crude Monte Carlo sample of size m.  While the (1 - p0)
    quantile of the current performance values stays below the failure
    threshold, it becomes the next level: the particles above it are kept
    as seeds and the population is regenerated to size m by running the
    component-wise Metropolis kernel of the original level sampler along
    balanced chains from each seed (coordinates pre-accepted on marginal
    input ratios, then one performance evaluation per composite
    candidate, rejected below the level).  The last stage records the
    fraction above the failure threshold.

    ``accounted_evaluations`` follows the conventional arithmetic of
    m + (stages - 1) * (1 - p0) * m, which counts one evaluation per
    regenerated particle; the true counter is at most that because
    candidates with every coordinate pre-rejected cost nothing.
    """
    if m < 10:
        raise ValueError("m must be >= 10")
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie in (0, 1)")
    counter = PerformanceCounter(problem)
    dist = problem.input
    u_final = problem.failure_threshold
    if move_config is None:
        move_config = MoveConfig(dist.sds, sweeps=1)

    points = dist.sample(m, rng)
    f_vals = counter.evaluate(points)
    records = []
    factors = []
    marker = 0
    for stage in range(1, max_stages + 1):
        stage_evals = counter.count - marker
        marker = counter.count
        if trace is not None:
            trace.append({"stage": stage, "points": points.copy(),
                          "f": f_vals.copy()})
        u_stage = float(np.quantile(f_vals, 1.0 - p0, method="inverted_cdf"))
        if u_stage >= u_final:
            factor = float(np.mean(f_vals > u_final))
            records.append(StageRecord(stage, u_final, factor, stage_evals))
            factors.append(factor)
            break
        # The adaptive-level construction makes every non-final factor p0
        # by definition; duplicate particles tying at the quantile only
        # perturb the survivor count, not the recorded factor.
        mask = f_vals > u_stage
        if not np.any(mask):
            raise DegeneratePopulationError(
                f"no particle above the stage-{stage} threshold")
        records.append(StageRecord(stage, u_stage, p0, stage_evals))
        factors.append(p0)
        points, f_vals = _regenerate_level(
            points, f_vals, mask, dist, u_stage, move_config, rng, counter, m)
    else:
        raise NonConvergenceError(
            f"failure threshold not reached within {max_stages} stages")

    estimate = float(np.prod(factors))
    n_stages = len(records)
    # one evaluation per regenerated (non-seed) particle and stage
    accounted = int(round(m + (n_stages - 1) * (1.0 - p0) * m))
    return EstimateReport(estimate=estimate, stages=records,
                          total_evaluations=counter.count, method="subsim",
                          seed=seed, accounted_evaluations=accounted,
                          trace=trace)


def bayesian_subsim(problem, config, rng=None, move_config=None,
                    build_surrogate=None, trace=None):
    """Bayesian Subset Simulation: subset stages on a kriging surrogate.

    Runs the stage loop of the sequential estimator: sample the particle
    cloud from the input distribution, build a greedy-maximin initial
    design on it, fit the model, then per stage solve the threshold
    equation, refine the model at that threshold until the cloud's mean
    misclassification is below the stage tolerance, re-solve the threshold
    with the refined model, record the weight factor, and regenerate the
    cloud by multinomial resampling plus Metropolis-within-Gibbs moves on
    the smoothed target (input density times excursion probability, no
    performance evaluations).  Stops once the solved threshold reaches the
    failure threshold; the estimate is the product of stage factors.

    Parameters
    ----------
    problem : ReliabilityProblem
    config : BssConfig
    rng : numpy Generator, optional
        Defaults to a generator seeded with ``config.seed``.
    move_config : MoveConfig, optional
        Defaults to 15 fixed-scan sweeps with the input marginal standard
        deviations as proposal scales.  Moves touch only the model, so
        extra sweeps cost no performance evaluations; the default matches
        the mixing depth of chain-based level samplers at p0 = 0.1.
    build_surrogate : callable, optional
        ``build_surrogate(designs, observations, rng) -> model`` hook
        replacing the REML-fitted kriging model (used by diagnostics and
        degeneration tests).
    trace : list, optional
        Appends one record per stage with the cloud, weights and the
        learning trajectory.

    Returns
    -------
    EstimateReport
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    dist = problem.input
    d = problem.dims
    if config.n0 < d + 2:
        raise ValueError(f"n0 must be >= d + 2 = {d + 2}")
    if config.n0 > config.m:
        raise ValueError("n0 cannot exceed the particle count m")
    if move_config is None:
        move_config = MoveConfig(dist.sds, sweeps=15)
    counter = PerformanceCounter(problem)
    u_final = problem.failure_threshold

    particles = dist.sample(config.m, rng)
    doe = maximin_doe(particles, config.n0, scale=dist.sds)
    f_doe = counter.evaluate(doe)
    if build_surrogate is None:
        model = build_model(doe, f_doe, input_dist=dist,
                            seed=int(rng.integers(2 ** 31)))
    else:
        model = build_surrogate(doe, f_doe, rng)

    prev_g = np.ones(config.m)
    records = []
    factors = []
    done = False
    for t in range(1, config.max_stages + 1):
        count_at_entry = counter.count
        u_t = solve_threshold(particles, model, u_final, config.p0, prev_g)
        learn_trace = [] if trace is not None else None
        # Learn at the solved threshold, then re-solve with the refined
        # model so the recorded factor uses the best available fit.  When
        # the re-solve flips the stage between intermediate and final (the
        # entering model misjudged the reach to the failure threshold),
        # learn once more at the corrected threshold before recording.
        for _ in range(3):
            eta = config.eta_final if u_t >= u_final else config.eta_intermediate
            model, _, mean_tau = run_stage_learning(
                model, counter, u_t, particles, eta, config.stage_budget,
                rng=rng, trace=learn_trace)
            u_solved = solve_threshold(particles, model, u_final, config.p0,
                                       prev_g)
            flipped = (u_solved >= u_final) != (u_t >= u_final)
            u_t = u_solved
            if not flipped:
                break
        mean, var = model.predict(particles)
        g_now = excursion_from_moments(mean, var, u_t)
        weights, factor = compute_weights(g_now, prev_g)
        n_t = counter.count - count_at_entry
        records.append(StageRecord(t, u_t, factor, n_t, mean_tau))
        factors.append(factor)
        if trace is not None:
            trace.append({"stage": t, "threshold": u_t, "factor": factor,
                          "N_t": n_t, "mean_tau": mean_tau,
                          "points": particles.copy(), "weights": weights.copy(),
                          "learning": learn_trace})
        if u_t >= u_final:
            done = True
            break

        idx = multinomial_indices(weights, config.m, rng)
        particles = particles[idx].copy()

        def target(pts, mdl=model, u=u_t):
            mu, s2 = mdl.predict(pts)
            return dist.logpdf(pts) + log_excursion_from_moments(mu, s2, u)

        current = target(particles)
        pop = mwg_move(ParticlePopulation(particles), target, move_config, rng,
                       current_logdensity=current)
        particles = pop.points
        mean, var = model.predict(particles)
        prev_g = excursion_from_moments(mean, var, u_t)

    estimate = float(np.prod(factors))
    report = EstimateReport(estimate=estimate, stages=records,
                            total_evaluations=counter.count, method="bss",
                            seed=config.seed,
                            initial_design_evaluations=config.n0,
                            accounted_evaluations=counter.count,
                            trace=trace)
    if not done:
        raise NonConvergenceError(
            f"failure threshold not reached within {config.max_stages} stages",
            report=report)
    assert counter.count == config.n0 + sum(r.evaluations for r in records)
    return report


def compute_bayes_alpha(model, threshold, mc_sample):
    """Direct smoothed estimate: mean excursion probability over a sample."""
    mean, var = model.predict(np.atleast_2d(np.asarray(mc_sample, dtype=float)))
    return float(np.mean(excursion_from_moments(mean, var, threshold)))
