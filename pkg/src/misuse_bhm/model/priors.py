"""
ABOUTME: Prior log-densities on the constrained scale
ABOUTME: Normal intercepts, half-normal scales, horseshoe+ hierarchy on covariate effects
"""

import numpy as np

from ..models import HorseshoeFamily, ModelConfig
from .parameters import ParameterVector

_LOG_2PI = float(np.log(2.0 * np.pi))
_LOG_2_OVER_PI = float(np.log(2.0 / np.pi))


def normal_logpdf(x, sd):
    x = np.asarray(x, dtype=float)
    return float(np.sum(-0.5 * _LOG_2PI - np.log(sd) - 0.5 * (x / sd) ** 2))


def half_normal_logpdf(x, scale):
    x = np.asarray(x, dtype=float)
    return float(np.sum(0.5 * _LOG_2_OVER_PI - np.log(scale) - 0.5 * (x / scale) ** 2))


def half_cauchy_logpdf(x, scale):
    x = np.asarray(x, dtype=float)
    return float(np.sum(np.log(2.0 / np.pi) - np.log(scale) - np.log1p((x / scale) ** 2)))


def horseshoe_logpdf(x, scale, family: HorseshoeFamily) -> float:
    if family == HorseshoeFamily.HALF_NORMAL:
        return half_normal_logpdf(x, scale)
    return half_cauchy_logpdf(x, scale)


def _effects(beta, lam, zeta, tau, cfg: ModelConfig) -> float:
    if tau is None:
        return 0.0
    family, s = cfg.prior.horseshoe.family, cfg.prior.horseshoe.scale
    total = normal_logpdf(beta, lam)
    total += horseshoe_logpdf(lam, s * tau * zeta, family)
    total += horseshoe_logpdf(zeta, s, family)
    total += horseshoe_logpdf(tau, s, family)
    return total


def log_prior(theta: ParameterVector, cfg: ModelConfig) -> float:
    prior = cfg.prior
    total = normal_logpdf(theta.beta0_p, prior.intercept_sd)
    total += normal_logpdf(theta.beta0_m, prior.intercept_sd)
    total += _effects(theta.beta_p, theta.lambda_p, theta.zeta_p, theta.tau_p, cfg)
    total += _effects(theta.beta_m, theta.lambda_m, theta.zeta_m, theta.tau_m, cfg)
    for b, sigma in ((theta.b_p, theta.sigma0_p), (theta.b_m, theta.sigma0_m)):
        if sigma is not None:
            total += half_normal_logpdf(sigma, prior.re_scale)
            total += normal_logpdf(b, sigma)
    total += half_normal_logpdf(theta.gamma, prior.halfnormal_scale)
    total += half_normal_logpdf(theta.r, prior.halfnormal_scale)
    total += half_normal_logpdf(theta.sigma_shared, prior.halfnormal_scale)
    return total
