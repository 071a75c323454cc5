"""
ABOUTME: Likelihood blocks: censored Poisson deaths, lognormal county and state prevalence, binomial OUD ratio
ABOUTME: Each block has a term function returning its value and gradients w.r.t. log-scale intermediates
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import expit, gammaincc, gammaln, log_expit, logsumexp, xlog1py, xlogy

from ..exceptions import DomainError, NumericError
from ..models import ModelConfig
from .arrays import ModelData
from .parameters import ParameterVector

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))
# above this threshold the Poisson CDF is evaluated via the regularized gamma function
_CDF_SUM_LIMIT = 50


@dataclass
class DerivedRates:
    """County misuse prevalence and misuse-to-death rate."""

    p: np.ndarray
    m: np.ndarray


def linear_predictors(theta: ParameterVector, data: ModelData) -> Tuple[np.ndarray, np.ndarray]:
    eta_p = theta.beta0_p + data.x_p @ theta.beta_p
    if theta.b_p is not None:
        eta_p = eta_p + theta.b_p[data.state_index]
    eta_m = theta.beta0_m + data.x_m @ theta.beta_m
    if theta.b_m is not None:
        eta_m = eta_m + theta.b_m[data.state_index]
    return eta_p, eta_m


def county_rates(theta: ParameterVector, data: ModelData) -> DerivedRates:
    eta_p, eta_m = linear_predictors(theta, data)
    return DerivedRates(p=expit(eta_p), m=expit(eta_m))


def lognormal_moment_params(mean, sd):
    """Location u and squared scale v^2 of the lognormal with given mean and sd."""
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(mean <= 0):
        raise DomainError("lognormal mean must be positive")
    if np.any(sd < 0):
        raise DomainError("lognormal sd must be non-negative")
    v_sq = np.log1p((sd / mean) ** 2)
    u = np.log(mean) - 0.5 * v_sq
    if u.ndim == 0:
        return float(u), float(v_sq)
    return u, v_sq


def lognormal_term(y: np.ndarray, log_mean: np.ndarray, log_sd: np.ndarray):
    """Moment-matched lognormal log-density with derivatives w.r.t. log mean and log sd."""
    d = 2.0 * (log_sd - log_mean)
    w = np.logaddexp(0.0, d)
    dw_dsd = 2.0 * expit(d)
    log_y = np.log(y)
    e = log_y - log_mean + 0.5 * w
    value = -log_y - 0.5 * LOG_2PI - 0.5 * np.log(w) - e * e / (2.0 * w)
    dl_dw = -0.5 / w - e / (2.0 * w) + e * e / (2.0 * w * w)
    dl_da = e / w - dl_dw * dw_dsd
    dl_db = dl_dw * dw_dsd
    return value, dl_da, dl_db


def poisson_log_cdf(c: int, rate: np.ndarray) -> np.ndarray:
    """log P(D <= c) for D ~ Poisson(rate), elementwise."""
    rate = np.asarray(rate, dtype=float)
    if c <= _CDF_SUM_LIMIT:
        k = np.arange(c + 1, dtype=float)[:, None]
        terms = xlogy(k, rate[None, :]) - rate[None, :] - gammaln(k + 1.0)
        return logsumexp(terms, axis=0)
    with np.errstate(divide="ignore"):
        return np.log(gammaincc(c + 1.0, rate))


def death_term(log_rate: np.ndarray, data: ModelData) -> Tuple[float, np.ndarray]:
    """Poisson deaths; suppressed counties enter via P(D <= c). Gradient w.r.t. log rate."""
    grad = np.zeros_like(log_rate)
    rate = np.exp(log_rate)
    observed = data.death_mask & ~data.suppressed
    censored = data.death_mask & data.suppressed

    d = data.deaths[observed]
    lo = log_rate[observed]
    value = float(np.sum(d * lo - rate[observed] - gammaln(d + 1.0)))
    grad[observed] = d - rate[observed]

    if censored.any():
        c = data.threshold
        lc, rc = log_rate[censored], rate[censored]
        log_cdf = poisson_log_cdf(c, rc)
        value += float(np.sum(log_cdf))
        log_pmf_c = c * lc - rc - gammaln(c + 1.0)
        grad[censored] = -np.exp(lc + log_pmf_c - log_cdf)
    return value, grad


def county_prev_term(log_p: np.ndarray, log_r: np.ndarray, log_sigma_shared: np.ndarray, data: ModelData):
    """County OUD estimates against p * r_s.

    Returns the value and gradients w.r.t. each estimate's log mean, each
    ratio slot's log r, and each shared-SD group's log sigma.
    """
    mask = data.est_mask
    grad_mean = np.zeros(data.est_y.shape)
    grad_log_sigma = np.zeros(log_sigma_shared.shape)
    if not mask.any():
        return 0.0, grad_mean, grad_log_sigma

    slot = data.ratio_slot[data.est_state]
    log_mean = log_p[data.est_county] + log_r[slot]

    shared = data.est_group >= 0
    log_sd = np.empty(data.est_y.shape)
    log_sd[~shared] = np.log(np.maximum(data.est_sd[~shared], data.min_sd))
    if shared.any():
        raw = log_sigma_shared[data.est_group[shared]]
        log_sd[shared] = np.maximum(raw, np.log(data.min_sd))
    floored = shared & (log_sd <= np.log(data.min_sd))

    value, dl_da, dl_db = lognormal_term(data.est_y[mask], log_mean[mask], log_sd[mask])
    grad_mean[mask] = dl_da
    grad_sd = np.zeros(data.est_y.shape)
    grad_sd[mask] = dl_db
    grad_sd[floored] = 0.0
    if shared.any():
        groups = data.est_group[shared]
        grad_log_sigma = np.bincount(groups, weights=grad_sd[shared], minlength=log_sigma_shared.size)
    return float(np.sum(value)), grad_mean, grad_log_sigma


def state_prev_term(p: np.ndarray, log_gamma: float, data: ModelData):
    """State survey prevalence against gamma * population-weighted mean of p.

    Returns the value, the gradient w.r.t. eta_p (per county) and w.r.t. log gamma.
    """
    grad_eta = np.zeros(p.shape)
    if data.ev_state.size == 0:
        return 0.0, grad_eta, 0.0
    weighted = np.bincount(data.state_index, weights=p * data.population, minlength=data.n_states)
    ws = weighted[data.ev_state]
    log_mean = log_gamma + np.log(ws) - np.log(data.state_population[data.ev_state])
    log_sd = np.log(np.maximum(data.ev_sd, data.min_sd))
    value, dl_da, _ = lognormal_term(data.ev_y, log_mean, log_sd)
    per_state = np.bincount(data.ev_state, weights=dl_da / ws, minlength=data.n_states)
    grad_eta = per_state[data.state_index] * p * (1.0 - p) * data.population
    return float(np.sum(value)), grad_eta, float(np.sum(dl_da))


def ratio_term(r: np.ndarray, data: ModelData) -> Tuple[float, np.ndarray]:
    """Binomial OUD head counts among misusers; gradient w.r.t. logit r per slot."""
    grad = np.zeros(r.shape)
    if data.ev_state.size == 0 or r.size == 0:
        return 0.0, grad
    slot = data.ev_slot
    use = slot >= 0
    if not use.any():
        return 0.0, grad
    k, n = data.ev_q_oud[use], data.ev_q_misuse[use]
    rs = r[slot[use]]
    value = gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0) + xlogy(k, rs) + xlog1py(n - k, -rs)
    grad = np.bincount(slot[use], weights=k - n * rs, minlength=r.size)
    return float(np.sum(value)), grad


def _require_finite(name: str, value: float) -> float:
    if not np.isfinite(value):
        raise NumericError(f"{name} log-likelihood is not finite")
    return value


def _log_rates(theta: ParameterVector, data: ModelData):
    eta_p, eta_m = linear_predictors(theta, data)
    log_p, log_m = log_expit(eta_p), log_expit(eta_m)
    bad = ~np.isfinite(eta_p) | ~np.isfinite(eta_m)
    if bad.any():
        county = data.county_ids[int(np.argmax(bad))]
        raise NumericError(f"non-finite rate for county {county}")
    return eta_p, log_p, log_m


def loglik_deaths(theta: ParameterVector, data: ModelData) -> float:
    _, log_p, log_m = _log_rates(theta, data)
    value, _ = death_term(log_p + log_m + data.log_population, data)
    return _require_finite("deaths", value)


def loglik_county_prev(theta: ParameterVector, data: ModelData, cfg: ModelConfig) -> float:
    _, log_p, _ = _log_rates(theta, data)
    log_r = np.log(theta.r) if theta.r.size else theta.r
    value, _, _ = county_prev_term(log_p, log_r, np.log(theta.sigma_shared), data)
    return _require_finite("county prevalence", value)


def loglik_state_prev(theta: ParameterVector, data: ModelData, cfg: ModelConfig) -> float:
    eta_p, _, _ = _log_rates(theta, data)
    lognormal, _, _ = state_prev_term(expit(eta_p), float(np.log(theta.gamma)), data)
    binomial, _ = ratio_term(theta.r, data)
    return _require_finite("state prevalence", lognormal + binomial)
