"""Weight updating: one-step and batch rules, residual statistics."""

import math

import numpy as np
import pytest
from scipy.integrate import quad_vec

from kgdp.belief import (
    EmptyHistoryError,
    ResidualAccumulator,
    accumulate_residuals,
    batch_update,
    log_likelihood,
    mse,
    sequential_update,
)
from kgdp.core import CandidateSet, MeasurementHistory, NoiseModel
from conftest import table_candidate_set


class TestSequentialUpdate:
    def test_two_candidate_update_matches_closed_form(self):
        # p=(1/2,1/2), f=(0,1), sigma=1, y=0: posterior odds keep candidate 1
        # at exp(-1/2) of candidate 0's likelihood.
        cs = table_candidate_set([[0.0, 0.0], [1.0, 0.0]])
        out = sequential_update(cs, 0, 0.0, NoiseModel(1.0))
        expected0 = 1.0 / (1.0 + math.exp(-0.5))
        np.testing.assert_allclose(out.weights, [expected0, 1.0 - expected0], atol=1e-12)

    def test_constant_likelihood_leaves_weights_alone(self):
        cs = table_candidate_set([[2.0, 1.0], [2.0, 5.0], [2.0, -3.0]], weights=[0.6, 0.3, 0.1])
        out = sequential_update(cs, 0, 7.0, NoiseModel(0.5))
        np.testing.assert_allclose(out.weights, cs.weights, atol=1e-12)

    def test_zero_weight_is_absorbing(self):
        cs = table_candidate_set([[0.0, 0.0], [1.0, 0.0]], weights=[1.0, 0.0])
        out = sequential_update(cs, 0, 1.0, NoiseModel(1.0))  # y favors the dead one
        np.testing.assert_allclose(out.weights, [1.0, 0.0], atol=0)

    def test_rejects_non_finite_observation(self):
        cs = table_candidate_set([[0.0, 0.0]])
        with pytest.raises(ValueError):
            sequential_update(cs, 0, np.inf, NoiseModel(1.0))

    def test_candidates_unchanged(self):
        cs = table_candidate_set([[0.0, 1.0], [1.0, 0.0]])
        out = sequential_update(cs, 1, 0.3, NoiseModel(1.0))
        np.testing.assert_array_equal(out.values, cs.values)
        np.testing.assert_array_equal(out.thetas, cs.thetas)


class TestLogLikelihood:
    def test_empty_history_is_zero(self, linear_model, line_alternatives):
        assert (
            log_likelihood(
                np.array([0.0, 1.0]),
                MeasurementHistory.empty(),
                linear_model,
                NoiseModel(1.0),
                line_alternatives,
            )
            == 0.0
        )

    def test_zero_residual_is_zero(self, linear_model, line_alternatives):
        theta = np.array([0.0, 1.0])  # f(x) = x
        hist = MeasurementHistory.empty().append(2, 2.0)
        assert (
            log_likelihood(theta, hist, linear_model, NoiseModel(1.0), line_alternatives)
            == 0.0
        )

    def test_two_residuals(self, linear_model, line_alternatives):
        theta = np.array([0.0, 1.0])
        hist = MeasurementHistory.empty().append(1, 2.0).append(3, 5.0)  # residuals 1, 2
        out = log_likelihood(theta, hist, linear_model, NoiseModel(1.0), line_alternatives)
        assert out == pytest.approx(-2.5, abs=1e-14)


class TestBatchUpdate:
    def test_empty_history_gives_uniform(self, linear_model, line_alternatives):
        cs = batch_update(
            np.zeros((3, 2)), MeasurementHistory.empty(), linear_model, NoiseModel(1.0),
            line_alternatives,
        )
        np.testing.assert_allclose(cs.weights, [1 / 3] * 3, atol=1e-14)

    def test_single_entry_matches_sequential_from_uniform(self, linear_model, line_alternatives):
        rng = np.random.default_rng(0)
        thetas = rng.normal(size=(4, 2))
        noise = NoiseModel(0.7)
        hist = MeasurementHistory.empty().append(2, 1.3)
        batch = batch_update(thetas, hist, linear_model, noise, line_alternatives)
        seq = sequential_update(
            CandidateSet.build(thetas, linear_model, line_alternatives), 2, 1.3, noise
        )
        np.testing.assert_allclose(batch.log_weights, seq.log_weights, atol=1e-12)

    def test_sequential_chain_equivalence(self, linear_model, line_alternatives):
        rng = np.random.default_rng(1)
        for _ in range(10):
            thetas = rng.normal(size=(5, 2))
            noise = NoiseModel(float(rng.uniform(0.4, 2.0)))
            cs = CandidateSet.build(thetas, linear_model, line_alternatives)
            hist = MeasurementHistory.empty()
            for _ in range(20):
                m = int(rng.integers(len(line_alternatives)))
                y = float(rng.normal())
                hist = hist.append(m, y)
                cs = sequential_update(cs, m, y, noise)
            batch = batch_update(thetas, hist, linear_model, noise, line_alternatives)
            np.testing.assert_allclose(batch.log_weights, cs.log_weights, atol=1e-10)

    def test_rejects_empty_candidates(self, linear_model, line_alternatives):
        with pytest.raises(ValueError):
            batch_update(
                np.zeros((0, 2)), MeasurementHistory.empty(), linear_model, NoiseModel(1.0),
                line_alternatives,
            )


class TestMse:
    def test_single_entry(self, linear_model, line_alternatives):
        hist = MeasurementHistory.empty().append(1, 2.0)
        theta = np.array([0.0, 1.0])  # predicts 1.0 at x=1
        assert mse(theta, hist, linear_model, line_alternatives) == pytest.approx(1.0)

    def test_perfect_fit_is_zero(self, linear_model, line_alternatives):
        theta = np.array([0.5, 2.0])
        hist = MeasurementHistory.empty()
        for m in (0, 3, 1):
            hist = hist.append(m, linear_model.value(theta, line_alternatives.features[m]))
        assert mse(theta, hist, linear_model, line_alternatives) == 0.0

    def test_three_residuals(self, linear_model, line_alternatives):
        theta = np.array([0.0, 0.0])  # predicts 0 everywhere
        hist = (
            MeasurementHistory.empty().append(0, 1.0).append(0, 2.0).append(0, 3.0)
        )
        assert mse(theta, hist, linear_model, line_alternatives) == pytest.approx(14 / 3)

    def test_empty_history_is_an_error(self, linear_model, line_alternatives):
        with pytest.raises(EmptyHistoryError):
            mse(np.array([0.0, 0.0]), MeasurementHistory.empty(), linear_model, line_alternatives)

    def test_order_invariance(self, linear_model, line_alternatives):
        rng = np.random.default_rng(2)
        theta = rng.normal(size=2)
        entries = [(int(rng.integers(5)), float(rng.normal())) for _ in range(12)]
        h1 = MeasurementHistory.empty()
        for m, y in entries:
            h1 = h1.append(m, y)
        h2 = MeasurementHistory.empty()
        for m, y in reversed(entries):
            h2 = h2.append(m, y)
        assert mse(theta, h1, linear_model, line_alternatives) == pytest.approx(
            mse(theta, h2, linear_model, line_alternatives), abs=1e-12
        )


class TestResidualAccumulator:
    def test_first_entry_sets_sums(self, linear_model, line_alternatives):
        pool = np.array([[0.0, 0.0], [0.0, 1.0]])
        acc = ResidualAccumulator.empty(2)
        out = accumulate_residuals(acc, pool, line_alternatives[2], 3.0, linear_model)
        assert out.count == 1
        np.testing.assert_allclose(out.sums, [9.0, 1.0])

    def test_zero_residual_leaves_sum_unchanged(self, linear_model, line_alternatives):
        pool = np.array([[0.0, 1.0]])
        acc = ResidualAccumulator.empty(1)
        out = accumulate_residuals(acc, pool, line_alternatives[2], 2.0, linear_model)
        assert out.sums[0] == 0.0

    def test_matches_from_scratch_mse(self, linear_model, line_alternatives):
        rng = np.random.default_rng(9)
        pool = rng.normal(size=(100, 2))
        acc = ResidualAccumulator.empty(100)
        hist = MeasurementHistory.empty()
        for _ in range(10):
            m = int(rng.integers(5))
            y = float(rng.normal())
            hist = hist.append(m, y)
            acc = accumulate_residuals(acc, pool, line_alternatives[m], y, linear_model)
        direct = np.array(
            [mse(theta, hist, linear_model, line_alternatives) for theta in pool]
        )
        np.testing.assert_allclose(acc.mse(), direct, atol=1e-12)

    def test_mse_undefined_before_measurements(self):
        with pytest.raises(EmptyHistoryError):
            ResidualAccumulator.empty(3).mse()


class TestMartingaleProperty:
    """One-step updates are centered: the predictive mixture cannot move
    the expected weights."""

    def test_expected_posterior_equals_prior(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            values = rng.normal(scale=1.5, size=(n, 3))
            w = rng.dirichlet(np.ones(n))
            sigma = float(np.ptp(values[:, 0]) * rng.uniform(0.1, 1.0) + 0.05)
            cs = table_candidate_set(values, w)
            noise = NoiseModel(sigma)

            def integrand(y):
                mix = np.dot(
                    w,
                    np.exp(-((y - values[:, 0]) ** 2) / (2 * sigma**2))
                    / (math.sqrt(2 * math.pi) * sigma),
                )
                return sequential_update(cs, 0, y, noise).weights * mix

            lo = values[:, 0].min() - 10 * sigma
            hi = values[:, 0].max() + 10 * sigma
            expected, _ = quad_vec(integrand, lo, hi, epsabs=1e-10, epsrel=1e-10)
            np.testing.assert_allclose(expected, w, atol=1e-6)


class TestConcentration:
    """Repeated measurement of one alternative kills every candidate whose
    value there disagrees with the truth."""

    def test_wrong_candidates_die_under_repetition(self, linear_model, line_alternatives):
        gap = 1.0  # candidate values at x=1 are 1 and 2
        sigma = 0.2 * gap
        thetas = np.array([[0.0, 1.0], [1.0, 1.0]])  # truth is the first
        noise = NoiseModel(sigma)
        rng = np.random.default_rng(33)
        failures = 0
        for _ in range(100):
            ys = 1.0 + sigma * rng.standard_normal(500)
            hist = MeasurementHistory(np.ones(500, dtype=np.int64), ys)
            cs = batch_update(thetas, hist, linear_model, noise, line_alternatives)
            if cs.weights[1] >= 1e-6:
                failures += 1
        assert failures <= 5  # >= 95% of runs concentrate
