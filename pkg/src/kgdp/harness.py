"""Sequential campaign loop under a simulated truth, plus evaluation metrics.

A campaign is: initialize L candidates from the pool with uniform weights,
then repeat N times (select an alternative by policy, observe a noisy
value, update weights, resample if triggered), then report the estimated
best alternative and the pool member with the smallest MSE. The engine in
this module drives both the simulation harness and the live advisor
service, so a recorded live campaign replays bit-identically here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .belief import (
    EmptyHistoryError,
    ResidualAccumulator,
    accumulate_residuals,
    sequential_update,
)
from .core import (
    AlternativeSet,
    CandidateSet,
    MeasurementHistory,
    ModelSpec,
    NoiseModel,
    entropy,
    posterior_mean_values,
)
from .benchmarks import PriorSpec, make_pool
from .policies import (
    DEFAULT_SCORE_TOL,
    PolicyKind,
    QuadratureSpec,
    policy_score_vector,
    select_alternative,
)
from .resampler import ResampleConfig, resample, should_resample

__all__ = [
    "CampaignEngine",
    "CampaignStepError",
    "ExperimentConfig",
    "draw_initial_candidates",
    "ReplicationSummary",
    "StepRecord",
    "Trajectory",
    "TRUTH_MODES",
    "f_mse_metric",
    "final_estimates",
    "noise_sigma_from_level",
    "oc_percent",
    "opportunity_cost",
    "run_campaign",
    "run_replications",
    "theta_dim_error",
]

TRUTH_MODES = ("from-pool", "from-candidates", "external")

# Fixed substream order: changing the policy must not shift the noise draws
# of a paired replication.
_SUBSTREAMS = ("noise", "candidate-init", "policy", "resampler")


class CampaignStepError(RuntimeError):
    """A campaign failed; the message names the step at which it happened."""


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything needed to run (and re-run) a simulated campaign."""

    model: ModelSpec
    alternatives: AlternativeSet
    prior: PriorSpec
    n_candidates: int
    budget: int
    policy: PolicyKind
    noise_level: Optional[float] = None
    sigma: Optional[float] = None
    quadrature: QuadratureSpec = QuadratureSpec()
    resample: Optional[ResampleConfig] = None
    truth_mode: str = "from-pool"
    replications: int = 1
    base_seed: int = 0
    seeds: Optional[tuple[int, ...]] = None
    score_tol: float = DEFAULT_SCORE_TOL

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.n_candidates < 1:
            raise ValueError("need at least one candidate")
        if self.n_candidates > self.prior.pool_size:
            raise ValueError(
                f"candidates ({self.n_candidates}) must not exceed the pool size "
                f"({self.prior.pool_size})"
            )
        if self.truth_mode not in TRUTH_MODES:
            raise ValueError(f"truth_mode must be one of {TRUTH_MODES}")
        if self.sigma is None:
            if self.noise_level is None or not 0 < self.noise_level <= 1:
                raise ValueError("noise_level must lie in (0, 1] unless sigma is given")
        elif self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.model.dimension != self.prior.dimension:
            raise ValueError("model dimension and prior dimension disagree")
        if self.resample is not None:
            if self.resample.small_pool_size > self.prior.pool_size:
                raise ValueError("small pool size must not exceed the pool size")
            if self.resample.small_pool_size < self.n_candidates:
                raise ValueError("small pool must be at least as large as the candidate set")
            if self.resample.min_removal > self.n_candidates:
                raise ValueError("min_removal must not exceed the number of candidates")

    def replication_seeds(self, replications: Optional[int] = None) -> list[int]:
        """Per-replication seeds: explicit list if given, else derived from base_seed."""
        n = replications if replications is not None else self.replications
        if self.seeds is not None:
            if len(self.seeds) < n:
                raise ValueError(f"need {n} seeds, got {len(self.seeds)}")
            return [int(s) for s in self.seeds[:n]]
        state = np.random.SeedSequence(self.base_seed).generate_state(n, dtype=np.uint64)
        return [int(s) for s in state]


def noise_sigma_from_level(
    model: ModelSpec, truth: np.ndarray, alternatives: AlternativeSet, level: float
) -> float:
    """sigma = level times the range of the true curve over the menu."""
    if level <= 0:
        raise ValueError("noise level must be > 0")
    true_values = _true_values(model, truth, alternatives)
    rng_width = float(true_values.max() - true_values.min())
    if rng_width <= 0:
        raise ValueError("true function is constant over the alternatives; range is zero")
    return level * rng_width


def _true_values(model: ModelSpec, truth: np.ndarray, alternatives: AlternativeSet) -> np.ndarray:
    return np.array(
        [model.value(truth, alternatives.features[m]) for m in range(len(alternatives))]
    )


def opportunity_cost(
    model: ModelSpec, truth: np.ndarray, alternatives: AlternativeSet, cs: CandidateSet
) -> float:
    """True-value gap between the best alternative and the belief's pick."""
    true_values = _true_values(model, truth, alternatives)
    pick = int(np.argmax(posterior_mean_values(cs)))
    return float(true_values.max() - true_values[pick])


def oc_percent(
    model: ModelSpec, truth: np.ndarray, alternatives: AlternativeSet, cs: CandidateSet
) -> float:
    """Opportunity cost normalized by the true optimum (which must be nonzero)."""
    true_values = _true_values(model, truth, alternatives)
    best = float(true_values.max())
    if best == 0.0:
        raise ValueError("true optimum is zero; percentage opportunity cost undefined")
    pick = int(np.argmax(posterior_mean_values(cs)))
    return float((best - true_values[pick]) / best)


def f_mse_metric(
    model: ModelSpec, truth: np.ndarray, theta_hat: np.ndarray, alternatives: AlternativeSet
) -> float:
    """Mean over the menu of squared gaps between true and estimated curves."""
    gap = _true_values(model, truth, alternatives) - _true_values(model, theta_hat, alternatives)
    return float(np.mean(gap**2))


def theta_dim_error(truth: np.ndarray, theta_hat: np.ndarray, dim: int) -> float:
    """Absolute error of one parameter dimension.

    Reported per dimension only; dimensions carry different units, so a
    whole-vector norm would be meaningless.
    """
    truth = np.asarray(truth, dtype=np.float64)
    theta_hat = np.asarray(theta_hat, dtype=np.float64)
    if not 0 <= dim < truth.size:
        raise IndexError(f"dimension {dim} out of range [0, {truth.size})")
    return float(abs(truth[dim] - theta_hat[dim]))


def final_estimates(
    cs: CandidateSet, acc: ResidualAccumulator, pool_thetas: np.ndarray
) -> tuple[int, np.ndarray, int]:
    """Closing estimates: belief-best alternative and lowest-MSE pool member.

    Returns (alternative index, theta estimate, pool index of the estimate);
    ties break toward the lower index.
    """
    if acc.count == 0:
        raise EmptyHistoryError("parameter estimate is undefined before any measurement")
    x_hat = int(np.argmax(posterior_mean_values(cs)))
    theta_idx = int(np.argmin(acc.mse()))
    return x_hat, pool_thetas[theta_idx].copy(), theta_idx


@dataclass
class StepOutcome:
    """What one recorded measurement did to the belief state."""

    step: int
    resampled: bool
    resample_iterations: int = 0
    resample_cap_reached: bool = False


class CampaignEngine:
    """Belief state plus the update/resample mechanics for one campaign.

    The engine is policy-agnostic on the recording side: a measurement may
    be recorded at any alternative, recommended or not. Recommendations
    are pure reads; pure-exploration draws derive from (policy_seed, step)
    so repeating a recommendation cannot advance any generator state.
    """

    def __init__(
        self,
        model: ModelSpec,
        alternatives: AlternativeSet,
        pool_thetas: np.ndarray,
        candidates: CandidateSet,
        noise: NoiseModel,
        policy: PolicyKind,
        quadrature: QuadratureSpec,
        resample_cfg: Optional[ResampleConfig],
        policy_seed: int,
        resampler_rng: np.random.Generator,
        history: Optional[MeasurementHistory] = None,
        residuals: Optional[ResidualAccumulator] = None,
    ):
        self.model = model
        self.alternatives = alternatives
        self.pool_thetas = pool_thetas
        self.candidates = candidates
        self.noise = noise
        self.policy = policy
        self.quadrature = quadrature
        self.resample_cfg = resample_cfg
        self.policy_seed = int(policy_seed)
        self.resampler_rng = resampler_rng
        self.history = history if history is not None else MeasurementHistory.empty()
        self.residuals = (
            residuals if residuals is not None else ResidualAccumulator.empty(pool_thetas.shape[0])
        )
        if self.residuals.count != len(self.history):
            raise ValueError("residual accumulator is inconsistent with the history length")
        self._pool_columns: dict[int, np.ndarray] = {}

    @property
    def step(self) -> int:
        return len(self.history)

    def _exploration_rng(self) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence((self.policy_seed, self.step)))

    def pool_values_at(self, alt_index: int) -> np.ndarray:
        """f(x; theta) over the whole pool at one alternative, memoized per index."""
        col = self._pool_columns.get(alt_index)
        if col is None:
            col = self.model.values_at(self.pool_thetas, self.alternatives.features[alt_index])
            self._pool_columns[alt_index] = col
        return col

    def recommend(self, policy: Optional[PolicyKind] = None) -> int:
        kind = policy if policy is not None else self.policy
        return select_alternative(
            kind,
            self.candidates,
            self.alternatives,
            self.noise,
            self.quadrature,
            self._exploration_rng(),
        )

    def score_table(self) -> dict[str, list[float]]:
        """Score vectors of the deterministic policies, for transparency."""
        out: dict[str, list[float]] = {}
        for kind in (
            PolicyKind.KGDP_F,
            PolicyKind.KGDP_H,
            PolicyKind.MAX_VAR,
            PolicyKind.PURE_EXPLOITATION,
        ):
            vec = policy_score_vector(kind, self.candidates, self.noise, self.quadrature)
            key = "posterior-mean" if kind is PolicyKind.PURE_EXPLOITATION else kind.value
            out[key] = [float(v) for v in vec]
        return out

    def record(self, alt_index: int, y: float) -> StepOutcome:
        """Fold one measurement in: weight update, residuals, resampling."""
        if not 0 <= alt_index < len(self.alternatives):
            raise IndexError(
                f"alternative index {alt_index} out of range [0, {len(self.alternatives)})"
            )
        if not (isinstance(y, (int, float)) and math.isfinite(y)):
            raise ValueError("measurement must be a finite number")
        self.candidates = sequential_update(self.candidates, alt_index, float(y), self.noise)
        self.residuals = accumulate_residuals(
            self.residuals,
            self.pool_thetas,
            self.alternatives[alt_index],
            float(y),
            self.model,
            values=self.pool_values_at(alt_index),
        )
        self.history = self.history.append(alt_index, float(y))
        outcome = StepOutcome(step=self.step, resampled=False)
        if self.resample_cfg is not None and should_resample(
            self.step, self.candidates, self.resample_cfg
        ):
            result = resample(
                self.candidates,
                self.pool_thetas,
                self.residuals,
                self.history,
                self.resample_cfg,
                self.model,
                self.noise,
                self.alternatives,
                self.resampler_rng,
            )
            self.candidates = result.candidate_set
            outcome.resampled = True
            outcome.resample_iterations = result.iterations
            outcome.resample_cap_reached = result.cap_reached
        return outcome

    def estimates(self) -> tuple[int, np.ndarray, int]:
        return final_estimates(self.candidates, self.residuals, self.pool_thetas)


@dataclass(frozen=True)
class StepRecord:
    """Per-step trajectory row; metrics are computed after the step's update."""

    n: int
    x_index: int
    y: float
    oc: float
    oc_pct: float
    entropy: float
    p_truth: Optional[float]
    resampled: bool
    f_mse_sqrt_norm: float
    theta_errors: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Full record of one campaign replication."""

    records: tuple[StepRecord, ...]
    x_hat: int
    theta_hat: np.ndarray
    theta_hat_pool_index: int
    truth_pool_index: Optional[int]
    sigma: float
    seed: int


def draw_initial_candidates(
    rng: np.random.Generator, pool_size: int, n_candidates: int, truth_mode: str
) -> tuple[Optional[int], np.ndarray]:
    """Pick the truth (when simulated) and the initial candidate pool rows.

    From-pool campaigns exclude the truth from the initial draw (a random
    pool member is essentially never sampled into a small candidate set);
    from-candidates campaigns force it in and shuffle its position.
    """
    if truth_mode == "external":
        return None, rng.choice(pool_size, size=n_candidates, replace=False)
    truth_index = int(rng.integers(pool_size))
    others = np.delete(np.arange(pool_size), truth_index)
    if truth_mode == "from-pool":
        return truth_index, rng.choice(others, size=n_candidates, replace=False)
    picked = rng.choice(others, size=n_candidates - 1, replace=False)
    return truth_index, rng.permutation(np.append(picked, truth_index))


def run_campaign(
    cfg: ExperimentConfig, seed: int, pool_thetas: Optional[np.ndarray] = None
) -> Trajectory:
    """Run one replication to completion, deterministically in the seed."""
    if cfg.truth_mode == "external":
        raise ValueError("a simulated campaign needs a truth; truth_mode=external is for live use")
    ss = np.random.SeedSequence(seed)
    streams = dict(zip(_SUBSTREAMS, ss.spawn(len(_SUBSTREAMS))))
    if pool_thetas is None:
        pool_thetas = make_pool(cfg.prior)

    rng_init = np.random.default_rng(streams["candidate-init"])
    truth_index, candidate_rows = draw_initial_candidates(
        rng_init, cfg.prior.pool_size, cfg.n_candidates, cfg.truth_mode
    )
    truth = pool_thetas[truth_index]
    sigma = (
        cfg.sigma
        if cfg.sigma is not None
        else noise_sigma_from_level(cfg.model, truth, cfg.alternatives, cfg.noise_level)
    )
    noise = NoiseModel(sigma=sigma)
    candidates = CandidateSet.build(
        pool_thetas[candidate_rows],
        cfg.model,
        cfg.alternatives,
        pool_indices=candidate_rows,
    )
    engine = CampaignEngine(
        model=cfg.model,
        alternatives=cfg.alternatives,
        pool_thetas=pool_thetas,
        candidates=candidates,
        noise=noise,
        policy=cfg.policy,
        quadrature=cfg.quadrature,
        resample_cfg=cfg.resample,
        policy_seed=int(streams["policy"].generate_state(1, dtype=np.uint64)[0]),
        resampler_rng=np.random.default_rng(streams["resampler"]),
    )
    rng_noise = np.random.default_rng(streams["noise"])
    true_values = _true_values(cfg.model, truth, cfg.alternatives)
    true_best = float(true_values.max())
    true_range = float(true_values.max() - true_values.min())
    if true_best == 0.0:
        raise CampaignStepError("step 0: true optimum is zero; percentage metrics undefined")

    records: list[StepRecord] = []
    for n in range(cfg.budget):
        try:
            x_index = engine.recommend()
            y = float(true_values[x_index] + sigma * rng_noise.standard_normal())
            outcome = engine.record(x_index, y)
            _, theta_hat, _ = engine.estimates()
            cs = engine.candidates
            pick = int(np.argmax(posterior_mean_values(cs)))
            oc = float(true_best - true_values[pick])
            p_truth = float(np.sum(cs.weights[cs.pool_indices == truth_index]))
            f_mse = f_mse_metric(cfg.model, truth, theta_hat, cfg.alternatives)
            records.append(
                StepRecord(
                    n=outcome.step,
                    x_index=x_index,
                    y=y,
                    oc=oc,
                    oc_pct=oc / true_best,
                    entropy=entropy(cs),
                    p_truth=p_truth,
                    resampled=outcome.resampled,
                    f_mse_sqrt_norm=math.sqrt(f_mse) / true_range,
                    theta_errors=tuple(
                        theta_dim_error(truth, theta_hat, d) for d in range(cfg.model.dimension)
                    ),
                )
            )
        except Exception as exc:  # noqa: BLE001 - annotate with the failing step
            raise CampaignStepError(f"step {n + 1}: {exc}") from exc
    x_hat, theta_hat, theta_pool_idx = engine.estimates()
    return Trajectory(
        records=tuple(records),
        x_hat=x_hat,
        theta_hat=theta_hat,
        theta_hat_pool_index=theta_pool_idx,
        truth_pool_index=truth_index,
        sigma=sigma,
        seed=int(seed),
    )


METRIC_NAMES = ("oc", "oc_pct", "entropy", "p_truth", "f_mse_sqrt_norm", "resampled")


@dataclass(frozen=True, eq=False)
class ReplicationSummary:
    """Across-replication per-step means and standard errors."""

    steps: np.ndarray
    means: dict[str, np.ndarray]
    sems: dict[str, np.ndarray]
    replications: int


def _metric_matrix(trajectories: Sequence[Trajectory], name: str) -> np.ndarray:
    if name.startswith("theta_err_"):
        dim = int(name.rsplit("_", 1)[1])
        return np.array([[r.theta_errors[dim] for r in t.records] for t in trajectories])
    if name == "resampled":
        return np.array([[float(r.resampled) for r in t.records] for t in trajectories])
    return np.array([[getattr(r, name) for r in t.records] for t in trajectories])


def summary_metric_names(dimension: int) -> list[str]:
    return list(METRIC_NAMES) + [f"theta_err_{d}" for d in range(dimension)]


def run_replications(
    cfg: ExperimentConfig,
    seeds: Optional[Sequence[int]] = None,
    trajectories: Optional[Sequence[Trajectory]] = None,
) -> tuple[list[Trajectory], ReplicationSummary]:
    """Run (or aggregate) replications and summarize each metric per step.

    Pre-computed trajectories may be passed in (the CLI runs them in
    parallel); aggregation order is fixed by the seed list either way.
    """
    if trajectories is None:
        seed_list = list(seeds) if seeds is not None else cfg.replication_seeds()
        pool = make_pool(cfg.prior)
        trajectories = [run_campaign(cfg, s, pool_thetas=pool) for s in seed_list]
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("need at least one replication")
    n_steps = len(trajectories[0].records)
    if any(len(t.records) != n_steps for t in trajectories):
        raise ValueError("trajectories disagree on the number of steps")
    r = len(trajectories)
    means: dict[str, np.ndarray] = {}
    sems: dict[str, np.ndarray] = {}
    for name in summary_metric_names(cfg.model.dimension):
        mat = _metric_matrix(trajectories, name)
        means[name] = mat.mean(axis=0)
        sems[name] = (
            mat.std(axis=0, ddof=1) / math.sqrt(r) if r > 1 else np.zeros(n_steps)
        )
    steps = np.arange(1, n_steps + 1)
    return trajectories, ReplicationSummary(steps=steps, means=means, sems=sems, replications=r)
