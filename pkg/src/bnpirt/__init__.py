"""Bayesian nonparametric infinite-mixture IRT via slice-sampling MCMC."""

__version__ = "0.1.0"

from .design import (
    DataError,
    ItemResponseData,
    ObservationDesign,
    WrongBuilderError,
    append_covariates,
    build_dichotomous,
    build_multidimensional,
    build_polytomous,
    ingest_csv,
)
from .diagnostics import (
    DiagnosticsError,
    FitReport,
    PosteriorSummary,
    batch_means_mcci,
    compare_models,
    fit_report,
    posterior_predictive,
    posterior_summary,
    predictive_criterion,
    r_squared,
    standardized_residual,
    trace_export,
)
from .estimator import BnpIrt
from .model import (
    MixtureWeightVector,
    ParameterState,
    PriorConfig,
    data_log_likelihood,
    latent_moments,
    log_prior_density,
    mixture_weight,
    observation_pmf,
    response_probability,
    weight_window,
)
from .sampler import (
    ChainConfig,
    ChainSamples,
    LatentState,
    NumericalError,
    compute_n_max,
    run_chain,
    xi,
)
from .simulate import simulate_dataset

__all__ = [
    "BnpIrt",
    "ChainConfig",
    "ChainSamples",
    "DataError",
    "DiagnosticsError",
    "FitReport",
    "ItemResponseData",
    "LatentState",
    "MixtureWeightVector",
    "NumericalError",
    "ObservationDesign",
    "ParameterState",
    "PosteriorSummary",
    "PriorConfig",
    "WrongBuilderError",
    "append_covariates",
    "batch_means_mcci",
    "build_dichotomous",
    "build_multidimensional",
    "build_polytomous",
    "compare_models",
    "compute_n_max",
    "data_log_likelihood",
    "fit_report",
    "ingest_csv",
    "latent_moments",
    "log_prior_density",
    "mixture_weight",
    "observation_pmf",
    "posterior_predictive",
    "posterior_summary",
    "predictive_criterion",
    "r_squared",
    "response_probability",
    "run_chain",
    "simulate_dataset",
    "standardized_residual",
    "trace_export",
    "weight_window",
    "xi",
]
