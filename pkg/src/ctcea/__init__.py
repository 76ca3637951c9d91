"""Continuous-time cost-effectiveness analysis.

Joint modeling of healthcare encounter gap times and costs in continuous
time, with Monte Carlo g-computation of causal cost-effectiveness
estimands (monetary value, net monetary benefit, restricted mean survival,
mean total cost) under dynamic treatment regimes.
"""

from .benchmark import BenchConfig, BenchReport, run_benchmark
from .data import Cohort, CovariateSchema, parse_cohort, write_cohort
from .gcomp import EstimandDraws, GCompConfig, Regime, always, evaluate_draws, threshold
from .likelihood import log_likelihood, prepare_data
from .mcmc import PosteriorDraws, SamplerConfig, run_mcmc
from .mle import MLFit, fit_censor_rate, fit_ml, fit_propensity
from .model import DgpConfig, GenerativeModel, dgp_schema
from .params import (
    ModelSpec,
    ParamLayout,
    build_model,
    default_grids,
    misspecified_spec,
    parametric_spec,
    piecewise_spec,
    vector_to_model,
)
from .priors import PriorConfig, log_prior
from .simgen import benchmark_truth, simulate_cohort

__version__ = "0.1.0"

__all__ = [
    "BenchConfig", "BenchReport", "run_benchmark",
    "Cohort", "CovariateSchema", "parse_cohort", "write_cohort",
    "EstimandDraws", "GCompConfig", "Regime", "always", "evaluate_draws", "threshold",
    "log_likelihood", "prepare_data",
    "PosteriorDraws", "SamplerConfig", "run_mcmc",
    "MLFit", "fit_censor_rate", "fit_ml", "fit_propensity",
    "DgpConfig", "GenerativeModel", "dgp_schema",
    "ModelSpec", "ParamLayout", "build_model", "default_grids",
    "misspecified_spec", "parametric_spec", "piecewise_spec", "vector_to_model",
    "PriorConfig", "log_prior",
    "benchmark_truth", "simulate_cohort",
    "__version__",
]
