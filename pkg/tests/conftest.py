"""Shared builders for the test suite."""

import numpy as np
import pytest

from kgdp.core import AlternativeSet, CandidateSet, ModelSpec, normalize_log_weights


def table_candidate_set(values, weights=None) -> CandidateSet:
    """Candidate set with an explicit (L, M) value table; thetas are dummies.

    ``weights`` are linear probabilities; zeros are allowed and become
    -inf log-weights.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    n = values.shape[0]
    if weights is None:
        lw = np.full(n, -np.log(n))
    else:
        with np.errstate(divide="ignore"):
            lw = normalize_log_weights(np.log(np.asarray(weights, dtype=np.float64)))
    return CandidateSet(
        thetas=np.arange(n, dtype=np.float64)[:, None],
        log_weights=lw,
        values=values,
        pool_indices=np.full(n, -1, dtype=np.int64),
    )


def _linear_eval(theta, features):
    return float(theta[0] + theta[1] * features[0])


def _linear_eval_batch(thetas, features):
    return thetas[:, 0] + thetas[:, 1] * features[0]


@pytest.fixture
def linear_model() -> ModelSpec:
    """f(theta, x) = theta_0 + theta_1 * x_0, exact and easy to reason about."""
    return ModelSpec(
        dimension=2, evaluate=_linear_eval, evaluate_batch=_linear_eval_batch, name="linear"
    )


@pytest.fixture
def line_alternatives() -> AlternativeSet:
    """Five scalar alternatives x = 0..4."""
    return AlternativeSet(np.arange(5.0)[:, None])


def random_table_instance(rng, max_l=8, max_m=8, sigma_band=(0.05, 1.0)):
    """A random (candidate set, alternative, sigma) scoring instance.

    Sigma is drawn relative to the value spread: below ~5 percent of the
    spread a measurement is effectively noise-free and every score
    saturates, which no sensible campaign configures.
    """
    n = int(rng.integers(2, max_l + 1))
    m = int(rng.integers(2, max_m + 1))
    values = rng.normal(scale=rng.uniform(0.5, 3.0), size=(n, m))
    weights = rng.dirichlet(np.full(n, rng.uniform(0.4, 2.0)))
    if rng.random() < 0.25:
        weights[rng.integers(n)] = 0.0
        weights = weights / weights.sum()
    spread = float(np.ptp(values)) + 1e-9
    sigma = float(spread * rng.uniform(*sigma_band))
    return table_candidate_set(values, weights), int(rng.integers(m)), sigma
