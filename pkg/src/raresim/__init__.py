"""Rare-event failure probability estimation.

Three estimators over a shared problem abstraction: crude Monte Carlo,
Subset Simulation with adaptive levels, and a Bayesian variant that runs
the subset stages on a kriging surrogate so that only a handful of
performance-function evaluations are needed per run.
"""

from .bench import (ExperimentConfig, ReplicationStats, compute_stats,
                    derive_seed, load_config, run_experiment,
                    run_reference_comparison)
from .errors import (DegenerateModelError, DegeneratePopulationError,
                     DuplicatePointError, EvaluationError, ExperimentError,
                     GpFitError, GpPredictError, NoSelectablePointError,
                     NonConvergenceError, RareSimError, StageLearningError)
from .estimators import (BssConfig, EstimateReport, StageRecord,
                         bayesian_subsim, classic_subsim, compute_bayes_alpha,
                         crude_mc, maximin_doe, solve_threshold)
from .excursion import (ExcursionQuery, excursion_prob, misclassification,
                        run_stage_learning, select_next_point)
from .kriging import (CovarianceParams, GpModel, RemlConfig, build_model,
                      fit_reml, matern_cov)
from .problems import (InputDistribution, PerformanceCounter,
                       ReliabilityProblem, cantilever, eval_performance,
                       gaussian_tail, get_problem, input_logpdf, sample_input)
from .smc import (MoveConfig, ParticlePopulation, compute_weights,
                  multinomial_resample, mwg_move)

__version__ = "0.1.0"

__all__ = [
    "BssConfig", "CovarianceParams", "DegenerateModelError",
    "DegeneratePopulationError", "DuplicatePointError", "EstimateReport",
    "EvaluationError", "ExcursionQuery", "ExperimentConfig", "ExperimentError",
    "GpFitError", "GpModel", "GpPredictError", "InputDistribution",
    "MoveConfig", "NoSelectablePointError", "NonConvergenceError",
    "ParticlePopulation", "PerformanceCounter", "RareSimError",
    "ReliabilityProblem", "RemlConfig", "ReplicationStats", "StageLearningError",
    "StageRecord", "bayesian_subsim", "build_model", "cantilever",
    "classic_subsim", "compute_bayes_alpha", "compute_stats", "compute_weights",
    "crude_mc", "derive_seed", "eval_performance", "excursion_prob",
    "fit_reml", "gaussian_tail", "get_problem", "input_logpdf", "load_config",
    "matern_cov", "maximin_doe", "misclassification", "multinomial_resample",
    "mwg_move", "run_experiment", "run_reference_comparison",
    "run_stage_learning", "sample_input", "select_next_point",
    "solve_threshold",
]
