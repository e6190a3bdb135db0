import numpy as np
import pytest

from raresim.errors import NoSelectablePointError, StageLearningError
from raresim.excursion import (ExcursionQuery, excursion_prob,
                               misclassification, run_stage_learning,
                               select_next_point)
from raresim.kriging import CovarianceParams, GpModel
from raresim.problems import PerformanceCounter, gaussian_tail


class StubModel:
    """Fixed-moment predictor for unit tests of the probability formulas."""

    def __init__(self, means, variances):
        self.means = np.atleast_1d(np.asarray(means, dtype=float))
        self.variances = np.atleast_1d(np.asarray(variances, dtype=float))

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.atleast_2d(x)[:, 0].astype(int)
        if x.ndim == 1:
            return float(self.means[idx[0]]), float(self.variances[idx[0]])
        return self.means[idx], self.variances[idx]

    def duplicates(self, x):
        return np.zeros(np.atleast_2d(x).shape[0], dtype=bool)


def query_for(mean, var, threshold):
    return ExcursionQuery(StubModel([mean], [var]), threshold)


class TestExcursionProb:
    def test_degenerate_indicator(self):
        assert excursion_prob(query_for(1.0, 0.0, 0.5), [0.0]) == 1.0
        assert excursion_prob(query_for(0.2, 0.0, 0.5), [0.0]) == 0.0

    def test_symmetry_at_threshold(self):
        assert excursion_prob(query_for(2.0, 1.0, 2.0), [0.0]) == pytest.approx(0.5)

    def test_standard_normal_quantile(self):
        # (mean - u) / sd = 1.6449
        q = query_for(1.6449, 1.0, 0.0)
        assert excursion_prob(q, [0.0]) == pytest.approx(0.95, abs=1e-4)

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(0)
        designs = rng.uniform(size=(15, 2))
        model = GpModel(designs, rng.standard_normal(15),
                        CovarianceParams(variance=1.0, lengthscales=[0.4, 0.4]))
        x = np.array([0.5, 0.5])
        grid = np.linspace(-4.0, 4.0, 200)
        vals = [excursion_prob(ExcursionQuery(model, u), x) for u in grid]
        diffs = np.diff(vals)
        assert np.all(diffs <= 1e-12)

    def test_threshold_must_be_finite(self):
        with pytest.raises(ValueError):
            ExcursionQuery(StubModel([0.0], [1.0]), np.inf)


class TestMisclassification:
    def test_maximal_uncertainty(self):
        assert misclassification(query_for(0.0, 1.0, 0.0), [0.0]) == pytest.approx(0.5)

    def test_certain_classification(self):
        assert misclassification(query_for(5.0, 0.0, 0.0), [0.0]) == 0.0

    def test_min_of_g_and_complement(self):
        q = query_for(1.6449, 1.0, 0.0)  # g = 0.95
        assert misclassification(q, [0.0]) == pytest.approx(0.05, abs=1e-4)

    def test_range_and_zeros(self):
        rng = np.random.default_rng(1)
        designs = rng.uniform(size=(10, 2))
        obs = rng.standard_normal(10)
        model = GpModel(designs, obs,
                        CovarianceParams(variance=1.0, lengthscales=[0.5, 0.5]))
        pts = rng.uniform(-1, 2, size=(500, 2))
        q = ExcursionQuery(model, 0.3)
        tau = misclassification(q, pts)
        assert np.all(tau >= 0.0) and np.all(tau <= 0.5)
        g = excursion_prob(q, pts)
        certain = (g == 0.0) | (g == 1.0)
        assert np.all(tau[certain] == 0.0)


class TestSelectNextPoint:
    def test_argmax_of_tau(self):
        # tau values (0.01, 0.49, 0.3) from g = Phi(mean) at these means
        means = [2.3263478740408408, 0.02506890825871106, 0.5244005127080407]
        q = ExcursionQuery(StubModel(means, [1.0, 1.0, 1.0]), 0.0)
        cands = np.array([[0.0], [1.0], [2.0]])
        assert select_next_point(q, cands) == 1

    def test_tie_breaks_low_index(self):
        q = ExcursionQuery(StubModel([0.6, 0.6], [1.0, 1.0]), 0.0)
        assert select_next_point(q, np.array([[0.0], [1.0]])) == 0

    def test_single_candidate(self):
        q = ExcursionQuery(StubModel([0.3], [1.0]), 0.0)
        assert select_next_point(q, np.array([[0.0]])) == 0

    def test_all_duplicates_raises(self):
        rng = np.random.default_rng(2)
        designs = rng.uniform(size=(6, 2))
        model = GpModel(designs, rng.standard_normal(6),
                        CovarianceParams(variance=1.0, lengthscales=[0.5, 0.5]))
        with pytest.raises(NoSelectablePointError):
            select_next_point(ExcursionQuery(model, 0.0), designs.copy())

    def test_duplicates_skipped(self):
        rng = np.random.default_rng(3)
        designs = rng.uniform(size=(6, 2))
        model = GpModel(designs, rng.standard_normal(6),
                        CovarianceParams(variance=1.0, lengthscales=[0.5, 0.5]))
        fresh = np.array([[5.0, 5.0]])  # low tau but only non-duplicate
        cands = np.vstack([designs, fresh])
        q = ExcursionQuery(model, 0.0)
        assert select_next_point(q, cands) == 6


class TestRunStageLearning:
    def setup_model(self, seed=0, n=6):
        problem = gaussian_tail()
        rng = np.random.default_rng(seed)
        designs = problem.input.sample(n, rng)
        obs = problem.performance(designs)
        model = GpModel(designs, obs,
                        CovarianceParams(variance=1.0, lengthscales=[1.0]),
                        scales=problem.input.sds)
        return problem, model, rng

    def test_immediate_stop_when_resolved(self):
        problem, model, rng = self.setup_model()
        particles = model.designs.copy()  # tau = 0 at designs exactly
        out, n_evals, mean_tau = run_stage_learning(
            model, problem, 0.5, particles, eta=1e-6, budget=50, rng=rng)
        assert n_evals == 0
        assert out is model
        assert mean_tau <= 1e-6

    def test_zero_budget(self):
        problem, model, rng = self.setup_model()
        particles = problem.input.sample(50, rng)
        out, n_evals, _ = run_stage_learning(
            model, problem, 0.5, particles, eta=1e-9, budget=0, rng=rng)
        assert n_evals == 0
        assert out is model

    def test_learning_reduces_uncertainty(self):
        problem, model, rng = self.setup_model()
        particles = problem.input.sample(200, rng)
        from raresim.excursion import misclassification as tau_fn
        entry = float(np.mean(tau_fn(ExcursionQuery(model, 0.5), particles)))
        out, n_evals, mean_tau = run_stage_learning(
            model, problem, 0.5, particles, eta=1e-6, budget=60, rng=rng)
        assert mean_tau <= max(entry, 1e-6)
        assert out.n == model.n + n_evals
        # re-assert the stopping rule on exit
        final = float(np.mean(tau_fn(ExcursionQuery(out, 0.5), particles)))
        assert final <= 1e-6 or n_evals == 60

    def test_counter_shared_across_calls(self):
        problem, model, rng = self.setup_model()
        counter = PerformanceCounter(problem)
        particles = problem.input.sample(100, rng)
        _, n_evals, _ = run_stage_learning(
            model, counter, 0.5, particles, eta=1e-6, budget=30, rng=rng)
        assert counter.count == n_evals > 0

    def test_eta_and_budget_validated(self):
        problem, model, rng = self.setup_model()
        with pytest.raises(ValueError):
            run_stage_learning(model, problem, 0.5, model.designs, eta=0.0,
                               budget=5)
        with pytest.raises(ValueError):
            run_stage_learning(model, problem, 0.5, model.designs, eta=1e-6,
                               budget=-1)

    def test_abort_carries_partial_model(self):
        problem, model, rng = self.setup_model()

        class BrokenCounter(PerformanceCounter):
            def evaluate(self, x):
                from raresim.errors import EvaluationError
                raise EvaluationError("boom")

        particles = problem.input.sample(50, rng)
        with pytest.raises(StageLearningError) as err:
            run_stage_learning(model, BrokenCounter(problem), 0.5, particles,
                               eta=1e-9, budget=10, rng=rng)
        assert err.value.model is model
        assert err.value.evaluations == 0
