"""Shared value types for sequential learning over a sampled belief model.

A problem instance is a finite menu of alternatives (decision vectors x),
a parametric model f(x; theta) whose functional form is known, and a
discrete belief: L candidate parameter vectors with a probability weight
each. Weights live in log space everywhere; linear probabilities are a
derived view. All types are immutable after construction, so they can be
shared freely across threads; updates produce new values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "Alternative",
    "AlternativeSet",
    "CandidateSet",
    "DegenerateWeightsError",
    "MeasurementHistory",
    "ModelSpec",
    "NoiseModel",
    "as_parameter_vector",
    "entropy",
    "entropy_of_log_weights",
    "log_sum_exp",
    "normalize_log_weights",
    "posterior_mean",
    "posterior_mean_values",
]

# Normalization is considered exact when |log-sum-exp(log_weights)| stays
# below this bound.
WEIGHT_NORMALIZATION_TOL = 1e-12


class DegenerateWeightsError(ValueError):
    """Raised when every log-weight is -inf, so no distribution exists."""


def _readonly(values, dtype=np.float64) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


def log_sum_exp(log_values: np.ndarray, axis: Optional[int] = None):
    """Stable log(sum(exp(...))), tolerating -inf entries.

    A slice of all -inf yields -inf. +inf and NaN entries are rejected by
    the callers that build weight vectors; this helper assumes they are
    absent.
    """
    lv = np.asarray(log_values, dtype=np.float64)
    if lv.size == 0:
        raise ValueError("log_sum_exp of an empty array")
    m = np.max(lv, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(lv - shift), axis=axis, keepdims=True)) + shift
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)


def normalize_log_weights(log_weights) -> np.ndarray:
    """Shift log-weights so the implied probabilities sum to one.

    -inf entries (zero probability) are preserved. Raises
    DegenerateWeightsError when no entry is finite.
    """
    lw = np.asarray(log_weights, dtype=np.float64)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log-weights must be a non-empty 1-D vector")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log-weights must be finite or -inf")
    if not np.any(lw > -np.inf):
        raise DegenerateWeightsError("degenerate weights: all log-weights are -inf")
    return lw - log_sum_exp(lw)


def as_parameter_vector(values) -> np.ndarray:
    """Validate and freeze a parameter vector theta (1-D, finite)."""
    theta = np.array(values, dtype=np.float64)
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("parameter vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(theta)):
        raise ValueError("parameter vector entries must be finite")
    theta.setflags(write=False)
    return theta


@dataclass(frozen=True, eq=False)
class Alternative:
    """One measurable design: an index into the menu plus its features x."""

    index: int
    features: np.ndarray

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("alternative index must be non-negative")
        feats = np.atleast_1d(np.array(self.features, dtype=np.float64))
        if not np.all(np.isfinite(feats)):
            raise ValueError("alternative features must be finite")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)


@dataclass(frozen=True, eq=False)
class AlternativeSet:
    """The ordered finite menu of M >= 2 alternatives, indexed 0..M-1."""

    features: np.ndarray  # (M, k)

    def __post_init__(self):
        feats = np.atleast_2d(np.array(self.features, dtype=np.float64))
        if feats.shape[0] < 2:
            raise ValueError("an alternative set needs at least two alternatives")
        if not np.all(np.isfinite(feats)):
            raise ValueError("alternative features must be finite")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, index: int) -> Alternative:
        if not 0 <= index < len(self):
            raise IndexError(f"alternative index {index} out of range [0, {len(self)})")
        return Alternative(index=index, features=self.features[index])

    def __iter__(self) -> Iterator[Alternative]:
        for m in range(len(self)):
            yield self[m]

    @property
    def alternatives(self) -> tuple[Alternative, ...]:
        return tuple(self)


@dataclass(frozen=True)
class NoiseModel:
    """Known standard deviation of the additive Gaussian measurement noise."""

    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("noise sigma must be finite and > 0")


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A deterministic parametric model f(theta, x) of known form.

    ``evaluate`` maps (theta, features) to a scalar and must be pure.
    ``evaluate_batch``, when provided, maps an (n, d) block of parameter
    vectors and one feature vector to an (n,) value array; it exists so
    pool-sized evaluations stay vectorized.
    """

    dimension: int
    evaluate: Callable[[np.ndarray, np.ndarray], float]
    evaluate_batch: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("model dimension must be >= 1")

    def value(self, theta: np.ndarray, features: np.ndarray) -> float:
        out = float(self.evaluate(np.asarray(theta, dtype=np.float64), features))
        if not math.isfinite(out):
            raise ValueError(f"model '{self.name}' produced a non-finite value")
        return out

    def values_at(self, thetas: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Evaluate every row of ``thetas`` at one feature vector."""
        block = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        if block.shape[1] != self.dimension:
            raise ValueError(
                f"expected parameter vectors of dimension {self.dimension}, "
                f"got {block.shape[1]}"
            )
        if self.evaluate_batch is not None:
            out = np.asarray(self.evaluate_batch(block, features), dtype=np.float64)
        else:
            out = np.array([self.evaluate(row, features) for row in block], dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise ValueError(f"model '{self.name}' produced non-finite values")
        return out

    def value_table(self, thetas: np.ndarray, alternatives: AlternativeSet) -> np.ndarray:
        """(n, M) table of model values over a block of parameter vectors."""
        block = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        cols = [self.values_at(block, alternatives.features[m]) for m in range(len(alternatives))]
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """L candidate parameter vectors with normalized log-weights.

    ``values`` caches f(x; theta_i) over the whole alternative menu, since
    acquisition scores repeatedly sweep all (candidate, alternative) pairs.
    ``pool_indices`` records where each candidate came from in the sampled
    prior pool (-1 for candidates without a pool identity), which lets a
    caller track whether a designated truth has entered the set.
    """

    thetas: np.ndarray        # (L, d)
    log_weights: np.ndarray   # (L,)
    values: np.ndarray        # (L, M)
    pool_indices: np.ndarray  # (L,) int64

    def __post_init__(self):
        thetas = np.atleast_2d(np.array(self.thetas, dtype=np.float64))
        lw = np.array(self.log_weights, dtype=np.float64)
        values = np.atleast_2d(np.array(self.values, dtype=np.float64))
        pool = np.array(self.pool_indices, dtype=np.int64)
        n = thetas.shape[0]
        if n < 1:
            raise ValueError("candidate set must hold at least one candidate")
        if lw.shape != (n,) or values.shape[0] != n or pool.shape != (n,):
            raise ValueError("candidate set fields disagree on the number of candidates")
        if not np.all(np.isfinite(thetas)):
            raise ValueError("candidate parameter vectors must be finite")
        if abs(log_sum_exp(lw)) > WEIGHT_NORMALIZATION_TOL:
            raise ValueError("candidate log-weights are not normalized")
        for arr in (thetas, lw, values, pool):
            arr.setflags(write=False)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "pool_indices", pool)

    @classmethod
    def build(
        cls,
        thetas: np.ndarray,
        model: ModelSpec,
        alternatives: AlternativeSet,
        log_weights: Optional[np.ndarray] = None,
        pool_indices: Optional[Sequence[int]] = None,
    ) -> "CandidateSet":
        """Construct a set, filling the value cache and defaulting to uniform weights."""
        block = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        n = block.shape[0]
        if log_weights is None:
            lw = np.full(n, -math.log(n))
        else:
            lw = normalize_log_weights(log_weights)
        if pool_indices is None:
            pool = np.full(n, -1, dtype=np.int64)
        else:
            pool = np.asarray(pool_indices, dtype=np.int64)
        values = model.value_table(block, alternatives)
        return cls(thetas=block, log_weights=lw, values=values, pool_indices=pool)

    def with_log_weights(self, log_weights: np.ndarray) -> "CandidateSet":
        """Same candidates, new (already normalized) log-weights."""
        return replace(self, log_weights=np.asarray(log_weights, dtype=np.float64))

    def __len__(self) -> int:
        return self.thetas.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def n_alternatives(self) -> int:
        return self.values.shape[1]


def posterior_mean(cs: CandidateSet, alt_index: int) -> float:
    """Belief-weighted model value at one alternative: sum_i p_i f(x; theta_i)."""
    if not 0 <= alt_index < cs.n_alternatives:
        raise IndexError(f"alternative index {alt_index} out of range [0, {cs.n_alternatives})")
    return float(np.dot(cs.weights, cs.values[:, alt_index]))


def posterior_mean_values(cs: CandidateSet) -> np.ndarray:
    """The whole belief-mean curve over the alternative menu, shape (M,)."""
    return cs.weights @ cs.values


def entropy_of_log_weights(log_weights: np.ndarray) -> float:
    """Shannon entropy (natural log) with the p log p -> 0 convention at p = 0."""
    lw = np.asarray(log_weights, dtype=np.float64)
    finite = lw > -np.inf
    w = np.exp(lw[finite])
    return float(-np.dot(w, lw[finite]))


def entropy(cs: CandidateSet) -> float:
    """Entropy of the candidate weights, in [0, ln L]."""
    return entropy_of_log_weights(cs.log_weights)


@dataclass(frozen=True, eq=False)
class MeasurementHistory:
    """Ordered record of (alternative index, observed value) pairs."""

    alt_indices: np.ndarray  # (n,) int64
    observations: np.ndarray  # (n,) float64

    def __post_init__(self):
        idx = np.atleast_1d(np.array(self.alt_indices, dtype=np.int64))
        obs = np.atleast_1d(np.array(self.observations, dtype=np.float64))
        if idx.shape != obs.shape or idx.ndim != 1:
            raise ValueError("history indices and observations must be matching 1-D arrays")
        if idx.size and idx.min() < 0:
            raise ValueError("history alternative indices must be non-negative")
        if not np.all(np.isfinite(obs)):
            raise ValueError("history observations must be finite")
        idx.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "alt_indices", idx)
        object.__setattr__(self, "observations", obs)

    @classmethod
    def empty(cls) -> "MeasurementHistory":
        return cls(alt_indices=np.empty(0, dtype=np.int64), observations=np.empty(0))

    def append(self, alt_index: int, y: float) -> "MeasurementHistory":
        return MeasurementHistory(
            alt_indices=np.append(self.alt_indices, np.int64(alt_index)),
            observations=np.append(self.observations, float(y)),
        )

    def __len__(self) -> int:
        return int(self.alt_indices.size)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(m), float(y)) for m, y in zip(self.alt_indices, self.observations)]
