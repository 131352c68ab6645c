"""Candidate-set resampling against the sampled prior pool.

When the belief degenerates (most candidate weights collapse) or on a
fixed cadence, the weakest candidates are swapped for pool members that
explain the measurement history well: the R pool members with the
smallest MSE form a small pool, replacements are drawn from it by
likelihood-weighted sampling without replacement, and the refreshed set
is re-weighted from the full history. Sampling from a likelihood-weighted
small pool (rather than taking the R best outright) keeps exploration in
parameter space alive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .belief import EmptyHistoryError, ResidualAccumulator, batch_update
from .core import AlternativeSet, CandidateSet, MeasurementHistory, ModelSpec, NoiseModel

__all__ = [
    "ResampleConfig",
    "ResampleOutcome",
    "SmallPool",
    "build_small_pool",
    "removal_set",
    "resample",
    "should_resample",
    "weighted_sample_without_replacement",
]


@dataclass(frozen=True)
class ResampleConfig:
    """Trigger cadence and pool sizes for the resampling step.

    ``period``: resample every this many measurements regardless of health.
    ``epsilon``: weight threshold below which a candidate counts as dead.
    ``small_pool_size``: R, how many low-MSE pool members to sample from.
    ``min_removal``: how many least-probable candidates to drop when none
    fall below epsilon (prevents a stuck set of identical wrong candidates).
    ``max_iterations``: cap on remove/redraw/reweight passes in one call.
    """

    period: int = 5
    epsilon: float = 1e-3
    small_pool_size: int = 50
    min_removal: int = 1
    max_iterations: int = 25

    def __post_init__(self):
        if self.period < 1:
            raise ValueError("resample period must be >= 1")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.small_pool_size < 1:
            raise ValueError("small pool size must be >= 1")
        if self.min_removal < 1:
            raise ValueError("min_removal must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def default_small_pool_size(pool_size: int) -> int:
    """Default R: generous at desk scale, sublinear for very large pools."""
    return max(50, pool_size // 1000)


@dataclass(frozen=True, eq=False)
class SmallPool:
    """The R pool members with the smallest history MSE (ties by pool index)."""

    member_indices: np.ndarray   # (R,) int64, ascending MSE
    log_likelihoods: np.ndarray  # (R,)

    def __len__(self) -> int:
        return int(self.member_indices.size)


def should_resample(step: int, cs: CandidateSet, cfg: ResampleConfig) -> bool:
    """True on the cadence step or when more than half the candidates are dead.

    ``step`` is the number of measurements taken so far (the update that
    just happened). The degeneracy condition requires strictly more than
    L/2 weights strictly below epsilon.
    """
    if step >= 1 and step % cfg.period == 0:
        return True
    dead = int(np.sum(cs.weights < cfg.epsilon))
    return dead > len(cs) / 2


def removal_set(cs: CandidateSet, cfg: ResampleConfig) -> np.ndarray:
    """Indices of candidates to drop: all with weight <= epsilon.

    When every candidate clears the threshold, the ``min_removal`` least
    probable (ties broken toward the lower index) are dropped anyway so a
    uniformly wrong set cannot survive forever.
    """
    w = cs.weights
    low = np.nonzero(w <= cfg.epsilon)[0]
    if low.size:
        return low.astype(np.int64)
    k = min(cfg.min_removal, len(cs))
    return np.argsort(w, kind="stable")[:k].astype(np.int64)


def build_small_pool(acc: ResidualAccumulator, noise: NoiseModel, r: int) -> SmallPool:
    """Rank the pool by MSE and keep the best r members with their likelihoods."""
    if acc.count == 0:
        raise EmptyHistoryError("cannot build a small pool before any measurement")
    if not 1 <= r <= acc.sums.size:
        raise ValueError(f"small pool size {r} out of range [1, {acc.sums.size}]")
    order = np.argsort(acc.mse(), kind="stable")[:r]
    return SmallPool(
        member_indices=order.astype(np.int64),
        log_likelihoods=acc.log_likelihoods(noise)[order],
    )


def weighted_sample_without_replacement(
    items: Sequence[int] | np.ndarray,
    log_weights: np.ndarray,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw ``count`` distinct items with probability proportional to weight.

    Uses Gumbel-perturbed log-weights: the top-``count`` keys reproduce the
    law of sequential draws proportional to the remaining weights, in
    O(n log n) and deterministically for a given generator state.
    """
    items = np.asarray(items)
    lw = np.asarray(log_weights, dtype=np.float64)
    if items.shape != lw.shape or items.ndim != 1:
        raise ValueError("items and log-weights must be matching 1-D arrays")
    if count > items.size:
        raise ValueError(f"cannot draw {count} items from {items.size}")
    finite = lw > -np.inf
    if count > int(finite.sum()):
        raise ValueError("cannot draw more items than have positive weight")
    keys = np.where(finite, lw + rng.gumbel(size=lw.shape), -np.inf)
    order = np.argsort(-keys, kind="stable")
    return items[order[:count]]


@dataclass(frozen=True, eq=False)
class ResampleOutcome:
    """Result of one resampling call."""

    candidate_set: CandidateSet
    iterations: int
    cap_reached: bool
    drawn_pool_indices: np.ndarray  # pool indices introduced, all passes


def resample(
    cs: CandidateSet,
    pool_thetas: np.ndarray,
    acc: ResidualAccumulator,
    history: MeasurementHistory,
    cfg: ResampleConfig,
    model: ModelSpec,
    noise: NoiseModel,
    alternatives: AlternativeSet,
    rng: np.random.Generator,
) -> ResampleOutcome:
    """Swap out weak candidates until none sits at or below epsilon.

    Each pass removes the current removal set, draws as many replacements
    from the small pool (likelihood-weighted, without replacement within
    the draw), and re-weights the refreshed set from the full history. A
    replacement may duplicate a surviving candidate; pool members are
    discrete, so collisions are legitimate. If ``max_iterations`` passes
    still leave a weight at or below epsilon the current set is returned
    with ``cap_reached`` set rather than raising.
    """
    small = build_small_pool(acc, noise, cfg.small_pool_size)
    current = cs
    drawn: list[int] = []
    for iteration in range(1, cfg.max_iterations + 1):
        drop = removal_set(current, cfg)
        keep = np.setdiff1d(np.arange(len(current)), drop, assume_unique=True)
        picks = weighted_sample_without_replacement(
            small.member_indices, small.log_likelihoods, int(drop.size), rng
        )
        drawn.extend(int(i) for i in picks)
        thetas = np.vstack([current.thetas[keep], pool_thetas[picks]])
        pool_idx = np.concatenate([current.pool_indices[keep], picks.astype(np.int64)])
        current = batch_update(thetas, history, model, noise, alternatives, pool_indices=pool_idx)
        if not np.any(current.weights <= cfg.epsilon):
            return ResampleOutcome(current, iteration, False, np.asarray(drawn, dtype=np.int64))
    return ResampleOutcome(current, cfg.max_iterations, True, np.asarray(drawn, dtype=np.int64))
