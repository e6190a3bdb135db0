"""Benchmark harness: config files, replication loops, statistics, artifacts.

An experiment runs R independent replications of one estimator on one
problem, each replication seeded by a stable hash of the master seed and
the replication index, and writes three artifacts into the output
directory: ``summary.json`` (aggregate statistics plus per-run records,
byte-identical across reruns with the same config and seed), ``runs.csv``
(one row per replication at full float precision) and ``stages.csv`` (one
row per stage per replication).
"""

import csv
import hashlib
import json
import logging
import multiprocessing
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import ExperimentError, RareSimError
from .estimators import BssConfig, bayesian_subsim, classic_subsim, crude_mc
from .problems import get_problem
from .smc import MoveConfig

logger = logging.getLogger("raresim")

METHODS = ("mc", "subsim", "bss")

# Built-in settings of the reference cantilever benchmark.
PROFILES = {
    "paper-cantilever": {
        "problem": "cantilever",
        "method": "bss",
        "m": 1000,
        "p0": 0.1,
        "n0": 10,
        "eta_intermediate": 1e-6,
        "eta_final": 1e-7,
        "stage_budget": 100,
        "max_stages": 20,
        "replications": 50,
        "reference": 3.85e-5,
    },
}


@dataclass
class ExperimentConfig:
    """One experiment: a problem, a method, its parameters, R and a seed."""

    problem: str = "cantilever"
    method: str = "bss"
    m: int = 1000
    p0: float = 0.1
    n0: int = 10
    eta_intermediate: float = 1e-6
    eta_final: float = 1e-7
    stage_budget: int = 100
    max_stages: int = 20
    sweeps: int | None = None
    replications: int = 1
    seed: int = 0
    reference: float | None = None
    failure_threshold: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.reference is not None and self.reference <= 0.0:
            raise ValueError("reference must be > 0 when given")

    def build_problem(self):
        return get_problem(self.problem, failure_threshold=self.failure_threshold)

    def to_dict(self):
        return asdict(self)


def parse_config_text(text):
    """Parse the key = value experiment grammar into a dict.

    Lines are ``key = value`` with ``#`` comments; values are parsed as
    booleans, integers or floats when they look like one, otherwise kept
    as (optionally quoted) strings.  A ``profile`` key merges the named
    built-in defaults before the file's own keys.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        raw[key] = _parse_value(value)
    profile = raw.pop("profile", None)
    if profile is None:
        return raw
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}; known: {sorted(PROFILES)}")
    merged = dict(PROFILES[profile])
    merged.update(raw)
    return merged


def _parse_value(value):
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "'\"":
        return value[1:-1]
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def load_config(path, overrides=None):
    """Read an ExperimentConfig from a config file, with optional overrides."""
    with open(path, "r", encoding="utf-8") as handle:
        values = parse_config_text(handle.read())
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**values)


def derive_seed(master_seed, index):
    """Per-replication seed: first 8 bytes of sha256(\"master:index\")."""
    digest = hashlib.sha256(f"{master_seed}:{index}".encode("ascii")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class ReplicationStats:
    """Aggregate replication statistics of one experiment."""

    n_runs: int
    mean: float
    sd: float | None
    kappa: float | None
    cov: float | None
    cov_self: float | None
    estimates: list = field(default_factory=list)
    evaluations: list = field(default_factory=list)
    failures: int = 0

    def to_dict(self):
        return {"n_runs": self.n_runs, "mean": self.mean, "sd": self.sd,
                "kappa": self.kappa, "cov": self.cov, "cov_self": self.cov_self,
                "failures": self.failures}


def compute_stats(estimates, reference=None, evaluations=None):
    """Replication statistics: mean, sample sd, relative bias and variation.

    ``kappa`` is |mean - reference| / reference and ``cov`` the sample
    standard deviation (divisor R - 1) divided by the reference;
    ``cov_self`` divides by the mean instead.  With a single run the sd
    and both coefficients of variation are reported as unavailable.
    """
    estimates = [float(e) for e in estimates]
    if len(estimates) < 1:
        raise ValueError("need at least one estimate")
    if reference is not None and reference <= 0.0:
        raise ValueError("reference must be > 0")
    mean = float(np.mean(estimates))
    sd = float(np.std(estimates, ddof=1)) if len(estimates) > 1 else None
    kappa = abs(mean - reference) / reference if reference is not None else None
    cov = sd / reference if (sd is not None and reference is not None) else None
    cov_self = sd / mean if (sd is not None and mean > 0.0) else None
    return ReplicationStats(n_runs=len(estimates), mean=mean, sd=sd,
                            kappa=kappa, cov=cov, cov_self=cov_self,
                            estimates=estimates,
                            evaluations=list(evaluations or []))


def _trace_enabled():
    return os.environ.get("RARESIM_LOG", "off").lower() == "trace"


def run_replication(config, index, seed, trace_dir=None):
    """Run one replication; returns a JSON-ready record or a failure record."""
    problem = config.build_problem()
    rng = np.random.default_rng(seed)
    move = None if config.sweeps is None \
        else MoveConfig(problem.input.sds, sweeps=config.sweeps)
    trace = [] if trace_dir is not None else None
    try:
        if config.method == "mc":
            report = crude_mc(problem, config.m, rng, seed=seed)
        elif config.method == "subsim":
            report = classic_subsim(problem, config.m, config.p0, rng,
                                    move_config=move, seed=seed,
                                    max_stages=config.max_stages, trace=trace)
        else:
            bss = BssConfig(m=config.m, p0=config.p0, n0=config.n0,
                            eta_intermediate=config.eta_intermediate,
                            eta_final=config.eta_final,
                            stage_budget=config.stage_budget,
                            max_stages=config.max_stages, seed=seed)
            report = bayesian_subsim(problem, bss, move_config=move, trace=trace)
    except RareSimError as err:
        logger.info("replication %d failed: %s", index, err)
        return {"rep": index, "seed": seed, "failed": True, "error": str(err)}
    if trace_dir is not None and trace:
        _dump_trace(trace_dir, config.method, index, trace)
    record = report.to_dict()
    record["rep"] = index
    record["failed"] = False
    logger.info("replication %d: estimate=%.6g N=%d stages=%d",
                index, report.estimate, report.total_evaluations, report.n_stages)
    return record


def _dump_trace(trace_dir, method, index, trace):
    os.makedirs(trace_dir, exist_ok=True)
    for entry in trace:
        stage = entry["stage"]
        path = os.path.join(trace_dir, f"rep{index:03d}_stage{stage}_particles.csv")
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            points = np.atleast_2d(entry["points"])
            d = points.shape[1]
            if method == "subsim":
                writer.writerow([f"x{j}" for j in range(d)] + ["f"])
                for row, f_val in zip(points, entry["f"]):
                    writer.writerow([repr(float(v)) for v in row] + [repr(float(f_val))])
            else:
                writer.writerow([f"x{j}" for j in range(d)] + ["weight"])
                for row, w in zip(points, entry["weights"]):
                    writer.writerow([repr(float(v)) for v in row] + [repr(float(w))])
        learning = entry.get("learning")
        if learning:
            path = os.path.join(trace_dir, f"rep{index:03d}_stage{stage}_learning.csv")
            with open(path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow([f"x{j}" for j in range(len(learning[0]["point"]))]
                                + ["value", "mean_tau"])
                for step in learning:
                    writer.writerow([repr(float(v)) for v in step["point"]]
                                    + [repr(float(step["value"])),
                                       repr(float(step["mean_tau"]))])


def _replication_worker(args):
    config, index, seed, trace_dir = args
    return run_replication(config, index, seed, trace_dir=trace_dir)


def run_experiment(config, out_dir, jobs=1):
    """Run all replications, write artifacts, and aggregate statistics.

    Deterministic given the master seed: replication k always uses
    ``derive_seed(config.seed, k)`` regardless of the worker count.
    Replications that fail with an estimator error are excluded from the
    statistics and counted; more than 20% failures raises ExperimentError
    after the artifacts are written.
    """
    os.makedirs(out_dir, exist_ok=True)
    trace_dir = os.path.join(out_dir, "trace") if _trace_enabled() else None
    seeds = [derive_seed(config.seed, k) for k in range(config.replications)]
    tasks = [(config, k, seeds[k], trace_dir) for k in range(config.replications)]
    if jobs is None:
        jobs = os.cpu_count() or 1
    jobs = max(1, min(jobs, config.replications))
    if jobs == 1:
        results = [_replication_worker(task) for task in tasks]
    else:
        with multiprocessing.Pool(jobs) as pool:
            results = pool.map(_replication_worker, tasks)

    good = [r for r in results if not r["failed"]]
    failures = [r for r in results if r["failed"]]
    if not good:
        raise ExperimentError("every replication failed")
    stats = compute_stats([r["estimate"] for r in good],
                          reference=config.reference,
                          evaluations=[r["total_evaluations"] for r in good])
    stats.failures = len(failures)

    summary = {
        "config": config.to_dict(),
        "stats": stats.to_dict(),
        "runs": results,
    }
    if config.method == "mc":
        # Single-run Monte Carlo spread: binomial standard error, not a
        # sample statistic.
        for r in good:
            r["binomial_se"] = float(np.sqrt(r["estimate"] * (1.0 - r["estimate"])
                                             / config.m))
        if len(good) == 1:
            summary["binomial_se"] = good[0]["binomial_se"]

    _write_summary(os.path.join(out_dir, "summary.json"), summary)
    _write_runs_csv(os.path.join(out_dir, "runs.csv"), results)
    _write_stages_csv(os.path.join(out_dir, "stages.csv"), good)

    if len(failures) > 0.2 * config.replications:
        raise ExperimentError(
            f"{len(failures)} of {config.replications} replications failed")
    return stats


def _write_summary(path, summary):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_runs_csv(path, results):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rep", "seed", "failed", "estimate", "total_evaluations",
                         "accounted_evaluations", "n_stages"])
        for r in results:
            if r["failed"]:
                writer.writerow([r["rep"], r["seed"], 1, "", "", "", ""])
            else:
                writer.writerow([r["rep"], r["seed"], 0, repr(float(r["estimate"])),
                                 r["total_evaluations"],
                                 r["accounted_evaluations"] or "",
                                 len(r["stages"])])


def _write_stages_csv(path, good):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rep", "t", "u_t", "factor", "N_t", "mean_tau"])
        for r in good:
            for s in r["stages"]:
                writer.writerow([r["rep"], s["t"], repr(float(s["u_t"])),
                                 repr(float(s["factor"])), s["N_t"],
                                 "" if s["mean_tau"] is None
                                 else repr(float(s["mean_tau"]))])


def run_reference_comparison(out_dir, jobs=1, seed=20260808, mc_samples=10_000_000,
                             replications=50):
    """Three-method comparison on the cantilever case at desk scale.

    Crude Monte Carlo at ``mc_samples`` (one run, binomial standard
    error), Subset Simulation and the Bayesian variant at 50 replications
    each, all against the 3.85e-5 reference.  Writes per-method artifact
    directories plus ``table4.csv`` and ``table4.json``.
    """
    os.makedirs(out_dir, exist_ok=True)
    reference = 3.85e-5
    bss_values = dict(PROFILES["paper-cantilever"])
    bss_values["replications"] = replications
    bss_values["seed"] = derive_seed(seed, 103)
    configs = {
        "mc": ExperimentConfig(problem="cantilever", method="mc", m=mc_samples,
                               replications=1, seed=derive_seed(seed, 101),
                               reference=reference),
        "subsim": ExperimentConfig(problem="cantilever", method="subsim", m=1000,
                                   p0=0.1, replications=replications,
                                   seed=derive_seed(seed, 102),
                                   reference=reference),
        "bss": ExperimentConfig(**bss_values),
    }

    rows = []
    for method in ("mc", "subsim", "bss"):
        config = configs[method]
        stats = run_experiment(config, os.path.join(out_dir, method), jobs=jobs)
        evals = stats.evaluations
        if method == "mc":
            delta = float(np.sqrt(stats.mean * (1.0 - stats.mean) / config.m))
            delta_kind = "binomial"
        else:
            delta = stats.sd
            delta_kind = "sample"
        rows.append({
            "method": method,
            "m": config.m,
            "N_mean": float(np.mean(evals)),
            "N_min": int(np.min(evals)),
            "N_max": int(np.max(evals)),
            "estimate_mean": stats.mean,
            "delta": delta,
            "delta_kind": delta_kind,
            "kappa": stats.kappa,
            "cov": delta / reference,
        })

    with open(os.path.join(out_dir, "table4.json"), "w", encoding="utf-8") as handle:
        json.dump({"reference": reference, "rows": rows}, handle,
                  indent=2, sort_keys=True)
        handle.write("\n")
    with open(os.path.join(out_dir, "table4.csv"), "w", newline="",
              encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return rows
