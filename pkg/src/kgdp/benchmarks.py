"""Benchmark model family, prior pools, and the model plug-in registry.

The built-in benchmark is an asymmetric unimodal profit curve: stock
quantities x_1..x_k are filled in order against a uniformly distributed
demand D, each unit filled at stage i earning eta1_i and each unit
stocked costing eta2_i. The unknown parameter vector is theta =
(mean of D, eta2_1..eta2_k), giving a (k+1)-dimensional problem with a
closed-form, noise-free evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import AlternativeSet, ModelSpec, as_parameter_vector

__all__ = [
    "AsymmetricUnimodalSpec",
    "PriorSpec",
    "asym_eval",
    "asym_eval_mc_oracle",
    "build_model",
    "default_grid_points",
    "grid_alternatives",
    "make_pool",
    "register_model",
]


@dataclass(frozen=True, eq=False)
class AsymmetricUnimodalSpec:
    """Fixed constants of the benchmark family.

    ``eta1``: per-stage fill revenue coefficients, all > 0.
    ``demand_halfwidth``: h > 0; demand is D ~ Uniform(mu - h, mu + h)
    with mu carried in theta[0]. theta[1:] are the stocking costs eta2.
    """

    eta1: np.ndarray
    demand_halfwidth: float

    def __post_init__(self):
        eta1 = np.atleast_1d(np.array(self.eta1, dtype=np.float64))
        if eta1.ndim != 1 or eta1.size == 0 or np.any(eta1 <= 0):
            raise ValueError("eta1 must be a non-empty vector of positive constants")
        if not (math.isfinite(self.demand_halfwidth) and self.demand_halfwidth > 0):
            raise ValueError("degenerate demand support: halfwidth must be > 0")
        eta1.setflags(write=False)
        object.__setattr__(self, "eta1", eta1)

    @property
    def k(self) -> int:
        return int(self.eta1.size)

    @property
    def dimension(self) -> int:
        return self.k + 1

    def _check_x(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.shape != (self.k,):
            raise ValueError(f"decision vector must have length {self.k}")
        if np.any(x < 0):
            raise ValueError("decision vector entries must be >= 0")
        return x

    def value_single(self, theta: np.ndarray, x: np.ndarray) -> float:
        return float(self.value_batch(np.asarray(theta)[None, :], x)[0])

    def value_batch(self, thetas: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Closed-form expected profit for every theta row at one decision x.

        Each stage contributes E[min(x_i, (D - s_i)^+)] with s_i the stock
        already committed to earlier stages; over a uniform demand the
        expectation splits into a quadratic ramp piece and a saturated
        piece, so no sampling is involved.
        """
        x = self._check_x(x)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        if thetas.shape[1] != self.dimension:
            raise ValueError(f"expected theta of dimension {self.dimension}")
        h = self.demand_halfwidth
        mu = thetas[:, 0:1]
        eta2 = thetas[:, 1:]
        a = mu - h
        b = mu + h
        s = np.concatenate([[0.0], np.cumsum(x)[:-1]])[None, :]
        c1 = np.clip(s, a, b)
        c2 = np.clip(s + x[None, :], a, b)
        ramp = ((c2 - s) ** 2 - (c1 - s) ** 2) / 2.0
        filled = (ramp + x[None, :] * (b - c2)) / (b - a)
        return filled @ self.eta1 - np.sum(eta2 * x[None, :], axis=1)


def asym_eval(spec: AsymmetricUnimodalSpec, theta, x) -> float:
    """Exact expected profit at decision x under parameters theta."""
    return spec.value_single(as_parameter_vector(theta), np.asarray(x, dtype=np.float64))


def asym_eval_mc_oracle(
    spec: AsymmetricUnimodalSpec, theta, x, samples: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of the same expectation, with its standard error.

    Exists as the independent check on the closed form; reproducible from
    the seed.
    """
    theta = as_parameter_vector(theta)
    x = spec._check_x(np.asarray(x, dtype=np.float64))
    rng = np.random.default_rng(seed)
    mu, eta2 = theta[0], theta[1:]
    d = rng.uniform(mu - spec.demand_halfwidth, mu + spec.demand_halfwidth, samples)
    s = np.concatenate([[0.0], np.cumsum(x)[:-1]])
    filled = np.minimum(x[None, :], np.clip(d[:, None] - s[None, :], 0.0, None))
    profit = filled @ spec.eta1 - float(np.dot(eta2, x))
    stderr = float(profit.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(profit.mean()), stderr


def model_spec(spec: AsymmetricUnimodalSpec) -> ModelSpec:
    return ModelSpec(
        dimension=spec.dimension,
        evaluate=spec.value_single,
        evaluate_batch=spec.value_batch,
        name="asymmetric-unimodal",
    )


def default_grid_points(k: int) -> int:
    return 30 if k <= 2 else 10


def grid_alternatives(box, points_per_axis: int) -> AlternativeSet:
    """Uniform lattice over a box in decision space, row-major ordering.

    Each box row is (first, last) and may descend. The menu's numbering is
    otherwise arbitrary, but score ties break toward the lowest index, so
    the orientation decides which end of the box a tied policy measures.
    """
    box = np.atleast_2d(np.asarray(box, dtype=np.float64))
    if box.shape[1] != 2 or np.any(box[:, 0] == box[:, 1]):
        raise ValueError("box must be rows of (first, last) with first != last")
    if points_per_axis < 2:
        raise ValueError("need at least two grid points per axis")
    axes = [np.linspace(first, last, points_per_axis) for first, last in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return AlternativeSet(np.column_stack([m.ravel() for m in mesh]))


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Independent uniform prior box over theta, sampled into a pool of size K."""

    ranges: np.ndarray  # (d, 2)
    pool_size: int
    seed: int = 0

    def __post_init__(self):
        ranges = np.atleast_2d(np.array(self.ranges, dtype=np.float64))
        if ranges.shape[1] != 2 or np.any(ranges[:, 0] >= ranges[:, 1]):
            raise ValueError("prior ranges must be rows of (lower, upper) with lower < upper")
        if not np.all(np.isfinite(ranges)):
            raise ValueError("prior ranges must be finite")
        if self.pool_size < 1:
            raise ValueError("pool size must be >= 1")
        ranges.setflags(write=False)
        object.__setattr__(self, "ranges", ranges)

    @property
    def dimension(self) -> int:
        return int(self.ranges.shape[0])


def make_pool(prior: PriorSpec) -> np.ndarray:
    """K i.i.d. uniform draws over the prior box, deterministic per seed."""
    rng = np.random.default_rng(prior.seed)
    u = rng.random((prior.pool_size, prior.dimension))
    lo = prior.ranges[:, 0]
    hi = prior.ranges[:, 1]
    return lo + u * (hi - lo)


# ---------------------------------------------------------------------------
# Model registry: external models plug in under a name referenced by config.

ModelBuilder = Callable[[dict], tuple[ModelSpec, AlternativeSet]]

_REGISTRY: dict[str, ModelBuilder] = {}


def register_model(name: str, builder: ModelBuilder) -> None:
    """Register a model builder; builders take the config's model params and
    return (ModelSpec, AlternativeSet)."""
    if not name:
        raise ValueError("model name must be non-empty")
    _REGISTRY[name] = builder


def build_model(name: str, params: dict) -> tuple[ModelSpec, AlternativeSet]:
    if name not in _REGISTRY:
        known = ", ".join(sorted(_REGISTRY)) or "(none)"
        raise ValueError(f"unknown model '{name}'; registered models: {known}")
    return _REGISTRY[name](dict(params))


def _default_eta1(k: int) -> np.ndarray:
    return 0.8 ** np.arange(k)


def _build_asymmetric_unimodal(params: dict) -> tuple[ModelSpec, AlternativeSet]:
    allowed = {"k", "eta1", "demand_halfwidth", "x_box", "grid_points"}
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown model parameter(s): {', '.join(sorted(unknown))}")
    k = int(params.get("k", 1))
    if k < 1:
        raise ValueError("model parameter k must be >= 1")
    eta1 = np.asarray(params.get("eta1", _default_eta1(k)), dtype=np.float64)
    if eta1.shape != (k,):
        raise ValueError(f"eta1 must have length k={k}")
    halfwidth = float(params.get("demand_halfwidth", 5.0))
    spec = AsymmetricUnimodalSpec(eta1=eta1, demand_halfwidth=halfwidth)
    box = np.asarray(params.get("x_box", [[0.0, 10.0]] * k), dtype=np.float64)
    if box.shape != (k, 2):
        raise ValueError(f"x_box must be {k} rows of (lower, upper)")
    points = int(params.get("grid_points", default_grid_points(k)))
    return model_spec(spec), grid_alternatives(box, points)


register_model("asymmetric-unimodal", _build_asymmetric_unimodal)
