"""Sequential optimal learning over sampled nonlinear belief models.

The package keeps a discrete belief (L candidate parameter vectors with
probability weights) over an expensive-to-measure parametric function,
scores alternatives by value of information, and periodically resamples
weak candidates from a large prior pool guided by the measurement history.
"""

__version__ = "0.1.0"

from .core import (
    Alternative,
    AlternativeSet,
    CandidateSet,
    DegenerateWeightsError,
    MeasurementHistory,
    ModelSpec,
    NoiseModel,
    as_parameter_vector,
    entropy,
    normalize_log_weights,
    posterior_mean,
    posterior_mean_values,
)
from .belief import (
    EmptyHistoryError,
    ResidualAccumulator,
    accumulate_residuals,
    batch_update,
    log_likelihood,
    mse,
    sequential_update,
)
from .policies import (
    PolicyKind,
    QuadratureSpec,
    kgdp_f_score,
    kgdp_h_score,
    max_var_score,
    select_alternative,
)
from .resampler import (
    ResampleConfig,
    SmallPool,
    build_small_pool,
    removal_set,
    resample,
    should_resample,
    weighted_sample_without_replacement,
)
from .benchmarks import (
    AsymmetricUnimodalSpec,
    PriorSpec,
    asym_eval,
    asym_eval_mc_oracle,
    build_model,
    grid_alternatives,
    make_pool,
    register_model,
)
from .harness import (
    CampaignEngine,
    ExperimentConfig,
    Trajectory,
    f_mse_metric,
    final_estimates,
    noise_sigma_from_level,
    oc_percent,
    opportunity_cost,
    run_campaign,
    run_replications,
    theta_dim_error,
)
from .config import ConfigError, load_config_file, parse_config
