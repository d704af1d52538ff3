"""skewfit: skew-symmetric perturbations of symmetric posterior approximations.

Fit a Gaussian-type symmetric approximation to a Bayesian posterior, then
multiply it by the closed-form skewness-inducing factor to capture posterior
asymmetry at negligible extra cost, with rejection-free i.i.d. sampling.
"""

from .exceptions import (
    ConfigError,
    DimensionError,
    DomainTooSmallError,
    IndefiniteCurvatureError,
    NonConvergenceError,
    SkewfitError,
    StaleCacheError,
    StepSizeError,
    StuckChainError,
    SupportMismatchError,
    UnreliableEstimateError,
    UnsupportedModelError,
)
from .models import (
    Dataset,
    Family,
    GlmModel,
    ModelSpec,
    load_dataset,
    log_unnorm_posterior,
    mu_functional,
    posterior_derivatives,
)
from .symmetric import (
    EpOptions,
    GaussianApproximation,
    GvbOptions,
    LaplaceOptions,
    SnpApproximation,
    SymmetricApproximation,
    approx_from_dict,
    approx_to_dict,
    build_snp,
    fit_gep,
    fit_gvb,
    fit_laplace,
)
from .skew import (
    SkewnessFactor,
    SkewSymmetricApproximation,
    mirror,
    sample_skew,
    skew_factor,
    skew_factor_fast,
    skew_logpdf,
)
from .divergences import (
    DivergenceEstimate,
    GridSpec,
    alpha_div_grid,
    default_grid,
    grid_normalized,
    kl_grid,
    symmetrize_logpdf,
    tv_grid,
    tv_mc,
)
from .mcmc import ChainDiagnostics, McmcConfig, diagnostics, hmc_sample, rwm_sample
from .bench import (
    FUNCTIONAL_COLUMNS,
    ErrorTable,
    FunctionalSummary,
    RateCurve,
    emit_report,
    error_table,
    rate_experiment,
    summarize,
)
from .battery import BatteryCase, build_battery, exponential_rate_model
from .verify import run_verification

__version__ = "0.1.0"
