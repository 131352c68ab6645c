"""Acquisition scores and the measurement-selection policy switch.

Two value-of-information scores drive the sequential design. Both are the
expected one-step change of a belief functional when alternative x is
measured and the weights are re-conditioned on the noisy outcome:

* the "f" score uses the maximum of the belief-mean curve, rewarding
  measurements expected to raise the best attainable estimate;
* the "H" score uses negative entropy of the weights, rewarding
  measurements expected to reduce parameter uncertainty.

Both are mathematically non-negative; numerical evaluation may produce
tiny negatives within ``DEFAULT_SCORE_TOL``.

The outcome y is distributed as the belief mixture sum_j p_j N(f_j(x),
sigma^2). For the "H" score the integrand is smooth and per-component
Gauss-Hermite quadrature is accurate to near machine precision at the
default order. The "f" integrand max_x' fbar'(x') has kinks wherever the
inner argmax switches, and plain Gauss-Hermite stalls around 1e-3
relative error there; between switches, however, the integrand is a plain
Gaussian mixture (the posterior normalizer cancels against the outcome
density), so the default scheme locates the switch points and integrates
each segment in closed form via normal CDFs. A trapezoid rule over the
mixture support ("uniform-grid") is kept for both scores as an
independent cross-check route.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.special import ndtr

from .core import (
    AlternativeSet,
    CandidateSet,
    NoiseModel,
    entropy_of_log_weights,
    log_sum_exp,
    posterior_mean_values,
)

__all__ = [
    "DEFAULT_SCORE_TOL",
    "PolicyKind",
    "QuadratureSpec",
    "kgdp_f_score",
    "kgdp_f_scores",
    "kgdp_h_score",
    "kgdp_h_scores",
    "max_var_score",
    "max_var_scores",
    "policy_score_vector",
    "score_order_gap",
    "select_alternative",
]

# Tolerance for tiny negative scores produced by numerical integration of a
# mathematically non-negative quantity.
DEFAULT_SCORE_TOL = 1e-8

# The argmax switch scan stops this many sigmas beyond the extreme candidate
# values; outside, the posterior is numerically a point mass on the extreme
# candidate and the argmax cannot switch again (pairwise log-odds are linear
# in the outcome).
_TAIL_SIGMAS = 10.0

# Switch locations only need ~1e-5 sigma accuracy: the induced integral
# error is quadratic in the location error because the two branches agree
# at the true crossing. Sub-scan cells are ~5e-3 sigma wide already.
_BISECT_STEPS = 12


class PolicyKind(str, enum.Enum):
    """The selectable measurement policies."""

    KGDP_F = "kgdp-f"
    KGDP_H = "kgdp-h"
    PURE_EXPLORATION = "pure-exploration"
    PURE_EXPLOITATION = "pure-exploitation"
    MAX_VAR = "max-var"


@dataclass(frozen=True)
class QuadratureSpec:
    """How the expectation over the measurement outcome is evaluated.

    Under "gauss-hermite", ``order`` is the Gauss-Hermite order per mixture
    component for the "H" score and sets the switch-scan density for the
    "f" score. Under "uniform-grid", ``order`` is the total number of
    trapezoid points and ``grid_halfwidth`` the span beyond the extreme
    candidate values, in sigma multiples.

    The default order of 128 keeps the "H" score within ~1e-7 down to
    noise levels of a few percent of the candidate-value spread, where the
    posterior-weight transitions get much sharper than sigma.
    """

    scheme: str = "gauss-hermite"
    order: int = 128
    grid_halfwidth: float = 8.0

    def __post_init__(self):
        if self.scheme not in ("gauss-hermite", "uniform-grid"):
            raise ValueError(f"unknown quadrature scheme '{self.scheme}'")
        if self.order < 8:
            raise ValueError("quadrature order must be >= 8")
        if self.scheme == "uniform-grid" and self.grid_halfwidth < 4:
            raise ValueError("grid half-width must be >= 4 sigma")

    def doubled(self) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, 2 * self.order, self.grid_halfwidth)


@lru_cache(maxsize=16)
def _hermgauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return nodes, weights / math.sqrt(math.pi)


def _check_alt(cs: CandidateSet, alt_index: int) -> None:
    if not 0 <= alt_index < cs.n_alternatives:
        raise IndexError(f"alternative index {alt_index} out of range [0, {cs.n_alternatives})")


def _alt_indices(cs: CandidateSet, alt_indices) -> np.ndarray:
    if alt_indices is None:
        return np.arange(cs.n_alternatives)
    idx = np.atleast_1d(np.asarray(alt_indices, dtype=np.int64))
    for i in idx:
        _check_alt(cs, int(i))
    return idx


def _finite_belief(cs: CandidateSet):
    """Weights, log-weights and value rows of the positive-weight candidates."""
    mask = cs.log_weights > -np.inf
    return np.exp(cs.log_weights[mask]), cs.log_weights[mask], cs.values[mask, :]


def _log_posteriors(lw: np.ndarray, means, y, sigma: float) -> np.ndarray:
    """Row-normalized log posterior over candidates for each outcome node.

    ``means``: (A, J) candidate values at each scored alternative;
    ``y``: (A, n) outcome nodes. Returns (A, n, J).
    """
    ll = -((y[:, :, None] - means[:, None, :]) ** 2) / (2.0 * sigma**2)
    lp = lw[None, None, :] + ll
    return lp - log_sum_exp(lp, axis=2)[:, :, None]


def _posterior_best(lp: np.ndarray, values: np.ndarray) -> np.ndarray:
    """max over alternatives of the node-wise posterior-mean curve, (A, n)."""
    a, n, j = lp.shape
    pm = np.exp(lp).reshape(a * n, j) @ values
    return pm.max(axis=1).reshape(a, n)


def _posterior_entropies(lp: np.ndarray) -> np.ndarray:
    p = np.exp(lp)
    lp_safe = np.where(np.isfinite(lp), lp, 0.0)
    return -np.sum(p * lp_safe, axis=-1)


def _scan_grid(means: np.ndarray, sigma: float, span_sigmas: float, n: int) -> np.ndarray:
    """(A, n) outcome nodes spanning each alternative's mixture support."""
    lo = means.min(axis=1) - span_sigmas * sigma
    hi = means.max(axis=1) + span_sigmas * sigma
    t = np.linspace(0.0, 1.0, n)
    return lo[:, None] + t[None, :] * (hi - lo)[:, None]


def _envelope_argmax(lw, means, y, sigma, values, with_margin: bool = False):
    """Argmax over alternatives of the posterior-mean curve at each node.

    Detection only, so single precision suffices and the posterior
    normalizer can be skipped: it is a positive per-node scalar, leaving
    the argmax unchanged. The optional margin (best minus runner-up) is
    likewise only normalizer-scaled, which the dip heuristic tolerates.
    """
    y32 = y.astype(np.float32)
    m32 = means.astype(np.float32)
    ll = lw.astype(np.float32)[None, None, :] - ((y32[:, :, None] - m32[:, None, :]) ** 2) / (
        np.float32(2.0 * sigma**2)
    )
    ll -= ll.max(axis=2, keepdims=True)
    pm = np.exp(ll).reshape(-1, lw.size) @ values.astype(np.float32)
    am = pm.argmax(axis=1)
    if not with_margin:
        return am.reshape(y.shape), None
    best = pm.max(axis=1)
    pm[np.arange(pm.shape[0]), am] = -np.inf
    margin = (best - pm.max(axis=1)).reshape(y.shape)
    return am.reshape(y.shape), margin


def _suspect_cells(am: np.ndarray, margin: np.ndarray) -> np.ndarray:
    """(row, cell) pairs of scan cells that may contain an argmax switch.

    A cell is suspect when the argmax differs at its endpoints, or when the
    best-vs-runner-up margin dips low relative to how fast the margin moves
    between neighboring nodes (a narrow sliver where another alternative
    briefly wins can hide inside a cell without flipping its endpoints).
    """
    changed = np.diff(am, axis=1) != 0
    local = np.abs(np.diff(margin, axis=1))
    pad = np.zeros((margin.shape[0], 1))
    wobble = np.maximum(np.hstack([local, pad]), np.hstack([pad, local]))
    dip = np.minimum(margin[:, :-1], margin[:, 1:]) < 3.0 * np.maximum(
        wobble[:, :-1], wobble[:, 1:]
    )
    return np.argwhere(changed | dip)


def _kgdp_f_segment_exact(
    cs: CandidateSet, idx: np.ndarray, noise: NoiseModel, order: int
) -> np.ndarray:
    """Expected-best integral per alternative via argmax-switch segmentation.

    Between switches the integrand is a plain Gaussian mixture, so each
    segment's contribution is the maximum over alternatives of
    sum_i V[i, x'] p_i (Phi_i(b) - Phi_i(a)). Taking the max per segment
    keeps the result >= the prior best even if a narrow switch were to go
    undetected, so non-negativity is structural rather than numerical.
    """
    p, lw, values = _finite_belief(cs)
    prior_best = float(np.max(p @ values))
    sigma = noise.sigma
    means = values[:, idx].T  # (A, J)
    scores = np.zeros(idx.size)
    if p.size == 1:
        return scores
    # Constant-likelihood measurements cannot move the weights: score 0.
    active = np.nonzero(np.ptp(means, axis=1) > 0.0)[0]
    if active.size == 0:
        return scores

    n_scan = max(2 * order + 1, 257)
    y = _scan_grid(means[active], sigma, _TAIL_SIGMAS, n_scan)
    am, margin = _envelope_argmax(lw, means[active], y, sigma, values, with_margin=True)

    # Sub-scan every suspect cell, then bisect each located switch, all
    # vectorized across (alternative, cell) pairs.
    cells = _suspect_cells(am, margin)
    cuts_per_alt: dict[int, list[float]] = {int(a): [] for a in active}
    if cells.size:
        c_alt = active[cells[:, 0]]
        ya = y[cells[:, 0], cells[:, 1]]
        yb = y[cells[:, 0], cells[:, 1] + 1]
        ts = np.linspace(0.0, 1.0, 17)
        ys = ya[:, None] + ts[None, :] * (yb - ya)[:, None]
        ams, _ = _envelope_argmax(lw, means[c_alt], ys, sigma, values)
        hit = np.argwhere(np.diff(ams, axis=1) != 0)
        if hit.size:
            s_alt = c_alt[hit[:, 0]]
            lo_b = ys[hit[:, 0], hit[:, 1]]
            hi_b = ys[hit[:, 0], hit[:, 1] + 1]
            left = ams[hit[:, 0], hit[:, 1]]
            s_means = means[s_alt]
            for _ in range(_BISECT_STEPS):
                mid = 0.5 * (lo_b + hi_b)
                amm, _ = _envelope_argmax(lw, s_means, mid[:, None], sigma, values)
                on_left = amm[:, 0] == left
                lo_b = np.where(on_left, mid, lo_b)
                hi_b = np.where(on_left, hi_b, mid)
            for a_pos, cut in zip(s_alt, 0.5 * (lo_b + hi_b)):
                cuts_per_alt[int(a_pos)].append(float(cut))

    for a_pos in active:
        edges = np.concatenate([[-np.inf], np.sort(cuts_per_alt[int(a_pos)]), [np.inf]])
        z = (edges[:, None] - means[a_pos][None, :]) / sigma
        cdf = np.where(np.isneginf(z), 0.0, np.where(np.isposinf(z), 1.0, ndtr(z)))
        seg_mass = np.diff(cdf, axis=0) * p[None, :]  # (segments, J)
        scores[a_pos] = float(np.sum(np.max(seg_mass @ values, axis=1)) - prior_best)
    return scores


def _grid_nodes(means: np.ndarray, lw: np.ndarray, noise: NoiseModel, quad: QuadratureSpec):
    """Trapezoid nodes (A, n) and weights with the outcome density folded in."""
    sigma = noise.sigma
    y = _scan_grid(means, sigma, quad.grid_halfwidth, quad.order)
    log_density = log_sum_exp(
        lw[None, None, :] - (y[:, :, None] - means[:, None, :]) ** 2 / (2 * sigma**2),
        axis=2,
    ) - math.log(math.sqrt(2 * math.pi) * sigma)
    step = (y[:, -1] - y[:, 0]) / (quad.order - 1)
    trap = np.full(quad.order, 1.0)
    trap[0] = trap[-1] = 0.5
    return y, step[:, None] * trap[None, :] * np.exp(log_density)


def _kgdp_f_grid(cs, idx, noise: NoiseModel, quad: QuadratureSpec) -> np.ndarray:
    p, lw, values = _finite_belief(cs)
    means = values[:, idx].T
    y, node_w = _grid_nodes(means, lw, noise, quad)
    best = _posterior_best(_log_posteriors(lw, means, y, noise.sigma), values)
    prior_best = float(np.max(p @ values))
    return np.sum(node_w * best, axis=1) - prior_best


def _h_order_band(order: int, ratio: float) -> int:
    """Per-alternative Gauss-Hermite order for the entropy integrand.

    The posterior-weight transitions sharpen as sigma shrinks against the
    candidate-value spread, so the order backs off only where the
    integrand is genuinely easy (measured: order 32 is exact for
    sigma >= spread, 64 within ~1e-7 above 0.35 spread).
    """
    if ratio >= 1.0:
        return min(order, 32)
    if ratio >= 0.35:
        return min(order, 64)
    if ratio < 0.05:
        return max(order, 256)
    return order


def _kgdp_h_gauss_hermite(cs, idx, noise: NoiseModel, order: int) -> np.ndarray:
    p, lw, values = _finite_belief(cs)
    means = values[:, idx].T  # (A, J)
    scores = np.zeros(idx.size)
    spreads = np.ptp(means, axis=1)
    active = np.nonzero(spreads > 0.0)[0]
    if p.size == 1 or active.size == 0:
        return scores
    h_prior = entropy_of_log_weights(cs.log_weights)
    bands: dict[int, list[int]] = {}
    for a_pos in active:
        bands.setdefault(_h_order_band(order, noise.sigma / spreads[a_pos]), []).append(a_pos)
    for q, members in bands.items():
        rows = np.asarray(members)
        nodes, weights = _hermgauss(q)
        y = (
            means[rows][:, :, None] + math.sqrt(2.0) * noise.sigma * nodes[None, None, :]
        ).reshape(rows.size, -1)
        node_w = (p[:, None] * weights[None, :]).ravel()
        h_nodes = _posterior_entropies(_log_posteriors(lw, means[rows], y, noise.sigma))
        scores[rows] = h_prior - h_nodes @ node_w
    return scores


def _kgdp_h_grid(cs, idx, noise: NoiseModel, quad: QuadratureSpec) -> np.ndarray:
    _, lw, values = _finite_belief(cs)
    means = values[:, idx].T
    y, node_w = _grid_nodes(means, lw, noise, quad)
    h_nodes = _posterior_entropies(_log_posteriors(lw, means, y, noise.sigma))
    return entropy_of_log_weights(cs.log_weights) - np.sum(node_w * h_nodes, axis=1)


def kgdp_f_scores(
    cs: CandidateSet,
    noise: NoiseModel,
    quad: QuadratureSpec,
    alt_indices: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Expected one-step gain in max_x' fbar(x'), per alternative."""
    idx = _alt_indices(cs, alt_indices)
    if quad.scheme == "uniform-grid":
        return _kgdp_f_grid(cs, idx, noise, quad)
    return _kgdp_f_segment_exact(cs, idx, noise, quad.order)


def kgdp_h_scores(
    cs: CandidateSet,
    noise: NoiseModel,
    quad: QuadratureSpec,
    alt_indices: Optional[Sequence[int]] = None,
) -> np.ndarray:
    """Expected one-step entropy reduction, per alternative."""
    idx = _alt_indices(cs, alt_indices)
    if quad.scheme == "uniform-grid":
        return _kgdp_h_grid(cs, idx, noise, quad)
    return _kgdp_h_gauss_hermite(cs, idx, noise, quad.order)


def kgdp_f_score(
    cs: CandidateSet, alt_index: int, noise: NoiseModel, quad: QuadratureSpec
) -> float:
    """Expected one-step gain in max_x' fbar(x') from measuring one alternative."""
    _check_alt(cs, alt_index)
    return float(kgdp_f_scores(cs, noise, quad, [alt_index])[0])


def kgdp_h_score(
    cs: CandidateSet, alt_index: int, noise: NoiseModel, quad: QuadratureSpec
) -> float:
    """Expected one-step entropy reduction from measuring one alternative."""
    _check_alt(cs, alt_index)
    return float(kgdp_h_scores(cs, noise, quad, [alt_index])[0])


def max_var_score(cs: CandidateSet, alt_index: int) -> float:
    """Belief variance of the model value at this alternative."""
    _check_alt(cs, alt_index)
    w = cs.weights
    v = cs.values[:, alt_index]
    mean = float(np.dot(w, v))
    return float(np.dot(w, (v - mean) ** 2))


def max_var_scores(cs: CandidateSet) -> np.ndarray:
    w = cs.weights
    mean = w @ cs.values
    return w @ (cs.values - mean[None, :]) ** 2


def policy_score_vector(
    policy: PolicyKind,
    cs: CandidateSet,
    noise: NoiseModel,
    quad: QuadratureSpec,
):
    """Score of every alternative under the given policy.

    Returns None for pure exploration, which scores nothing and draws at
    random.
    """
    if policy is PolicyKind.KGDP_F:
        return kgdp_f_scores(cs, noise, quad)
    if policy is PolicyKind.KGDP_H:
        return kgdp_h_scores(cs, noise, quad)
    if policy is PolicyKind.MAX_VAR:
        return max_var_scores(cs)
    if policy is PolicyKind.PURE_EXPLOITATION:
        return posterior_mean_values(cs)
    if policy is PolicyKind.PURE_EXPLORATION:
        return None
    raise ValueError(f"unknown policy {policy!r}")


def select_alternative(
    policy: PolicyKind,
    cs: CandidateSet,
    alternatives: AlternativeSet,
    noise: NoiseModel,
    quad: QuadratureSpec,
    rng: np.random.Generator,
) -> int:
    """Pick the next alternative to measure.

    Score-based policies break ties deterministically toward the lowest
    index; pure exploration draws uniformly from the supplied generator.
    """
    if len(alternatives) != cs.n_alternatives:
        raise ValueError("alternative set does not match the candidate value cache")
    if policy is PolicyKind.PURE_EXPLORATION:
        return int(rng.integers(len(alternatives)))
    scores = policy_score_vector(policy, cs, noise, quad)
    return int(np.argmax(scores))


def score_order_gap(
    kind: PolicyKind,
    cs: CandidateSet,
    alt_index: int,
    noise: NoiseModel,
    quad: QuadratureSpec,
) -> float:
    """Self-check: |score at order - score at doubled order|.

    A large gap flags an under-resolved quadrature for this instance.
    """
    if kind is PolicyKind.KGDP_F:
        fn = kgdp_f_score
    elif kind is PolicyKind.KGDP_H:
        fn = kgdp_h_score
    else:
        raise ValueError("order self-check applies to the quadrature-based scores only")
    return abs(fn(cs, alt_index, noise, quad) - fn(cs, alt_index, noise, quad.doubled()))
