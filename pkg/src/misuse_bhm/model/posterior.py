"""
ABOUTME: Joint log posterior density on the unconstrained scale with its analytic gradient
ABOUTME: PosteriorTarget bundles data, config and layout into a picklable callable for samplers
"""

import logging
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit, log_expit

from ..exceptions import NumericError
from ..models import GammaConstraint, HorseshoeFamily, ModelConfig
from .arrays import ModelData
from .likelihood import county_prev_term, death_term, ratio_term, state_prev_term
from .parameters import ParameterLayout, unpack
from .priors import log_prior

logger = logging.getLogger(__name__)


def _scale_grad(x: np.ndarray, scale: float, family: HorseshoeFamily) -> np.ndarray:
    """d/dz of log f(exp(z)) + z for a half-normal or half-Cauchy f."""
    ratio_sq = (x / scale) ** 2
    if family == HorseshoeFamily.HALF_NORMAL:
        return 1.0 - ratio_sq
    return 1.0 - 2.0 * ratio_sq / (1.0 + ratio_sq)


def log_posterior_terms(z: np.ndarray, data: ModelData, cfg: ModelConfig,
                        layout: Optional[ParameterLayout] = None) -> Dict[str, float]:
    """Value decomposition (likelihood blocks, prior, Jacobian) at ``z``."""
    layout = layout or ParameterLayout.build(data, cfg)
    terms, _ = _evaluate(np.asarray(z, dtype=float), data, cfg, layout, with_grad=False)
    return terms


def log_posterior_and_gradient(z: np.ndarray, data: ModelData, cfg: ModelConfig,
                               layout: Optional[ParameterLayout] = None) -> Tuple[float, np.ndarray]:
    """Log posterior density of the unconstrained vector and its gradient.

    Returns ``-inf`` (with a zero gradient) when the density is not finite,
    so a sampler can treat the point as a divergence.
    """
    layout = layout or ParameterLayout.build(data, cfg)
    z = np.asarray(z, dtype=float)
    try:
        with np.errstate(all="ignore"):
            terms, grad = _evaluate(z, data, cfg, layout, with_grad=True)
    except NumericError:
        return -np.inf, np.zeros(layout.dim)
    value = sum(terms.values())
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        return -np.inf, np.zeros(layout.dim)
    return float(value), grad


def _evaluate(z, data: ModelData, cfg: ModelConfig, layout: ParameterLayout, with_grad: bool):
    u = unpack(z, layout)
    theta = u.theta
    s = layout.slices
    prior = cfg.prior
    family, hs_scale = prior.horseshoe.family, prior.horseshoe.scale

    eta_p = theta.beta0_p + data.x_p @ theta.beta_p
    eta_m = theta.beta0_m + data.x_m @ theta.beta_m
    if theta.b_p is not None:
        eta_p = eta_p + theta.b_p[data.state_index]
    if theta.b_m is not None:
        eta_m = eta_m + theta.b_m[data.state_index]
    log_p, log_m = log_expit(eta_p), log_expit(eta_m)
    p, m = expit(eta_p), expit(eta_m)
    log_r = log_expit(z[s["r"]])
    log_sigma_shared = z[s["sigma_shared"]]

    deaths, g_lograte = death_term(log_m + log_p + data.log_population, data)
    county, g_mean, g_log_sigma = county_prev_term(log_p, log_r, log_sigma_shared, data)
    state, g_eta_state, g_log_gamma = state_prev_term(p, u.log_gamma, data)
    ratio, g_logit_r = ratio_term(theta.r, data)

    terms = {
        "deaths": deaths,
        "county_prev": county,
        "state_prev": state + ratio,
        "prior": log_prior(theta, cfg),
        "jacobian": u.log_jacobian,
    }
    if not with_grad:
        return terms, None

    grad = np.zeros(layout.dim)
    g_eta_p = g_lograte * (1.0 - p) + g_eta_state
    g_eta_m = g_lograte * (1.0 - m)
    if data.est_mask.any():
        g_eta_p += np.bincount(data.est_county, weights=g_mean * (1.0 - p[data.est_county]),
                               minlength=data.n_counties)
        slot = data.ratio_slot[data.est_state]
        r_all = theta.r
        g_logit_r = g_logit_r + np.bincount(slot, weights=g_mean, minlength=r_all.size) * (1.0 - r_all)

    for part, g_eta, x in (("p", g_eta_p, data.x_p), ("m", g_eta_m, data.x_m)):
        beta0 = getattr(theta, f"beta0_{part}")
        grad[s[f"beta0_{part}"]] = g_eta.sum() - beta0 / prior.intercept_sd ** 2

        if layout.has(f"tau_{part}"):
            g_beta = x.T @ g_eta
            beta = getattr(theta, f"beta_{part}")
            lam = getattr(theta, f"lambda_{part}")
            zeta = getattr(theta, f"zeta_{part}")
            tau = getattr(theta, f"tau_{part}")
            raw_lam = np.exp(z[s[f"lambda_{part}"]])
            through_lambda = g_beta * beta
            grad[s[f"beta_{part}"]] = g_beta * lam - u.raw_beta[part]
            grad[s[f"lambda_{part}"]] = through_lambda + _scale_grad(raw_lam, hs_scale, family)
            grad[s[f"zeta_{part}"]] = through_lambda + _scale_grad(zeta, hs_scale, family)
            grad[s[f"tau_{part}"]] = through_lambda.sum() + _scale_grad(np.array([tau]), hs_scale, family)

        if layout.has(f"sigma0_{part}"):
            sigma = getattr(theta, f"sigma0_{part}")
            b = getattr(theta, f"b_{part}")
            g_b = np.bincount(data.state_index, weights=g_eta, minlength=data.n_states)
            grad[s[f"b_{part}"]] = g_b * sigma - u.raw_b[part]
            grad[s[f"sigma0_{part}"]] = np.dot(g_b, b) + 1.0 - (sigma / prior.re_scale) ** 2

    gamma = theta.gamma
    hn = prior.halfnormal_scale
    if layout.gamma_constraint == GammaConstraint.UNIT_INTERVAL:
        grad[s["gamma"]] = (g_log_gamma * (1.0 - gamma)
                            - gamma ** 2 * (1.0 - gamma) / hn ** 2 + 1.0 - 2.0 * gamma)
    else:
        grad[s["gamma"]] = g_log_gamma + 1.0 - (gamma / hn) ** 2

    r = theta.r
    grad[s["r"]] = g_logit_r - r ** 2 * (1.0 - r) / hn ** 2 + 1.0 - 2.0 * r

    sigma_shared = theta.sigma_shared
    grad[s["sigma_shared"]] = g_log_sigma + 1.0 - (sigma_shared / hn) ** 2
    return terms, grad


class PosteriorTarget:
    """Picklable log-density with gradient over the unconstrained vector."""

    def __init__(self, data: ModelData, cfg: ModelConfig):
        self.data = data
        self.cfg = cfg
        self.layout = ParameterLayout.build(data, cfg)

    @property
    def dim(self) -> int:
        return self.layout.dim

    def __call__(self, z: np.ndarray) -> Tuple[float, np.ndarray]:
        return log_posterior_and_gradient(z, self.data, self.cfg, self.layout)
