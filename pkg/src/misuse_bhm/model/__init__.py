"""
ABOUTME: Hierarchical multi-state model: parameter layout, transforms, likelihood, prior and posterior
"""

from .arrays import ModelData
from .likelihood import (
    DerivedRates,
    county_rates,
    loglik_county_prev,
    loglik_deaths,
    loglik_state_prev,
    lognormal_moment_params,
    poisson_log_cdf,
)
from .parameters import ParameterLayout, ParameterVector, from_unconstrained, to_unconstrained
from .posterior import PosteriorTarget, log_posterior_and_gradient, log_posterior_terms
from .priors import log_prior

__all__ = [
    "ModelData",
    "ParameterLayout",
    "ParameterVector",
    "DerivedRates",
    "PosteriorTarget",
    "county_rates",
    "from_unconstrained",
    "to_unconstrained",
    "log_prior",
    "log_posterior_and_gradient",
    "log_posterior_terms",
    "loglik_county_prev",
    "loglik_deaths",
    "loglik_state_prev",
    "lognormal_moment_params",
    "poisson_log_cdf",
]
