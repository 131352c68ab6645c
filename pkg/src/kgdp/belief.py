"""Bayesian updating of candidate weights and residual statistics.

Under Gaussian noise with known sigma, the posterior weight of candidate i
after observing y at alternative x multiplies the prior weight by
exp(-(y - f(x; theta_i))^2 / (2 sigma^2)). Every update here works with
log-weights; the constant (sqrt(2 pi) sigma)^-1 likelihood factors cancel
on normalization and are dropped throughout, so any cross-check against
the raw Gaussian density must multiply them back in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    Alternative,
    AlternativeSet,
    CandidateSet,
    MeasurementHistory,
    ModelSpec,
    NoiseModel,
    normalize_log_weights,
)

__all__ = [
    "EmptyHistoryError",
    "ResidualAccumulator",
    "accumulate_residuals",
    "batch_update",
    "candidate_log_likelihoods",
    "log_likelihood",
    "mse",
    "sequential_update",
]


class EmptyHistoryError(ValueError):
    """Raised when a statistic needs at least one measurement and has none."""


def sequential_update(
    cs: CandidateSet, alt_index: int, y: float, noise: NoiseModel
) -> CandidateSet:
    """One conjugate weight update after observing y at the given alternative.

    Zero weights (log-weight -inf) are absorbing: no observation can revive
    a candidate that has been ruled out.
    """
    if not np.isfinite(y):
        raise ValueError("observation must be finite")
    if not 0 <= alt_index < cs.n_alternatives:
        raise IndexError(f"alternative index {alt_index} out of range [0, {cs.n_alternatives})")
    resid = y - cs.values[:, alt_index]
    lw = cs.log_weights - resid**2 / (2.0 * noise.sigma**2)
    return cs.with_log_weights(normalize_log_weights(lw))


def log_likelihood(
    theta: np.ndarray,
    history: MeasurementHistory,
    model: ModelSpec,
    noise: NoiseModel,
    alternatives: AlternativeSet,
) -> float:
    """Log-likelihood of theta over the whole history, constants dropped.

    Returns -sum_j (y_j - f(x_j; theta))^2 / (2 sigma^2); 0 for an empty
    history (the empty product).
    """
    if len(history) == 0:
        return 0.0
    values = np.array(
        [model.value(theta, alternatives.features[m]) for m in history.alt_indices]
    )
    resid = history.observations - values
    return float(-np.sum(resid**2) / (2.0 * noise.sigma**2))


def candidate_log_likelihoods(
    cs: CandidateSet, history: MeasurementHistory, noise: NoiseModel
) -> np.ndarray:
    """Per-candidate history log-likelihood, read off the value cache."""
    if len(history) == 0:
        return np.zeros(len(cs))
    resid = history.observations[None, :] - cs.values[:, history.alt_indices]
    return -np.sum(resid**2, axis=1) / (2.0 * noise.sigma**2)


def batch_update(
    thetas: np.ndarray,
    history: MeasurementHistory,
    model: ModelSpec,
    noise: NoiseModel,
    alternatives: AlternativeSet,
    pool_indices: Optional[Sequence[int]] = None,
) -> CandidateSet:
    """Weights from scratch: uniform prior times the whole-history likelihood.

    Equals the chain of sequential updates applied from uniform weights, so
    a freshly drawn candidate set can be weighted without replaying the
    history step by step.
    """
    block = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if block.shape[0] < 1:
        raise ValueError("batch update needs at least one candidate")
    cs = CandidateSet.build(block, model, alternatives, pool_indices=pool_indices)
    if len(history) == 0:
        return cs
    lw = candidate_log_likelihoods(cs, history, noise)
    return cs.with_log_weights(normalize_log_weights(lw))


def mse(
    theta: np.ndarray,
    history: MeasurementHistory,
    model: ModelSpec,
    alternatives: AlternativeSet,
) -> float:
    """Mean squared residual of theta against the measurement history."""
    if len(history) == 0:
        raise EmptyHistoryError("MSE is undefined on an empty history")
    values = np.array(
        [model.value(theta, alternatives.features[m]) for m in history.alt_indices]
    )
    return float(np.mean((history.observations - values) ** 2))


@dataclass(frozen=True, eq=False)
class ResidualAccumulator:
    """Running sum of squared residuals for every member of the sampled pool.

    Keeping the sums incrementally makes each measurement O(K) instead of
    recomputing O(K n) sums whenever pool statistics are needed.
    """

    sums: np.ndarray  # (K,)
    count: int

    def __post_init__(self):
        sums = np.atleast_1d(np.array(self.sums, dtype=np.float64))
        if self.count < 0:
            raise ValueError("residual count must be non-negative")
        if np.any(sums < 0) or not np.all(np.isfinite(sums)):
            raise ValueError("residual sums must be finite and non-negative")
        sums.setflags(write=False)
        object.__setattr__(self, "sums", sums)

    @classmethod
    def empty(cls, pool_size: int) -> "ResidualAccumulator":
        return cls(sums=np.zeros(pool_size), count=0)

    def mse(self) -> np.ndarray:
        """Per-member mean squared error, sums / count."""
        if self.count == 0:
            raise EmptyHistoryError("MSE is undefined on an empty history")
        return self.sums / self.count

    def log_likelihoods(self, noise: NoiseModel) -> np.ndarray:
        """Per-member history log-likelihood (constants dropped)."""
        return -self.sums / (2.0 * noise.sigma**2)


def accumulate_residuals(
    acc: ResidualAccumulator,
    pool_thetas: np.ndarray,
    alt: Alternative,
    y: float,
    model: ModelSpec,
    values: Optional[np.ndarray] = None,
) -> ResidualAccumulator:
    """Fold one measurement into the pool-wide residual sums.

    ``values`` can supply precomputed f(x; theta) for the whole pool at this
    alternative (callers that cache per-alternative pool columns pass it).
    """
    if not np.isfinite(y):
        raise ValueError("observation must be finite")
    if values is None:
        values = model.values_at(pool_thetas, alt.features)
    if values.shape != acc.sums.shape:
        raise ValueError("pool value vector does not match accumulator size")
    return ResidualAccumulator(sums=acc.sums + (y - values) ** 2, count=acc.count + 1)
