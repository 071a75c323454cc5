"""
ABOUTME: Tests for the joint model: likelihood oracles, transforms, hold-out masks and the analytic gradient
"""

import dataclasses

import numpy as np
import pytest
from scipy import stats
from scipy.special import expit

from misuse_bhm.exceptions import DomainError, ModelConfigurationError
from misuse_bhm.model import (
    ModelData,
    ParameterLayout,
    ParameterVector,
    PosteriorTarget,
    from_unconstrained,
    log_posterior_and_gradient,
    log_posterior_terms,
    lognormal_moment_params,
    poisson_log_cdf,
    to_unconstrained,
)
from misuse_bhm.models import (
    GammaConstraint,
    HorseshoeFamily,
    HorseshoeSpec,
    ModelConfig,
    PriorSpec,
    RatioSource,
    SyntheticSpec,
)
from misuse_bhm.validate import simulate_synthetic


def _finite_difference(f, z, h=1e-5):
    grad = np.empty_like(z)
    for k in range(z.size):
        step = np.zeros_like(z)
        step[k] = h
        grad[k] = (f(z + step) - f(z - step)) / (2.0 * h)
    return grad


def test_censored_probability_at_threshold():
    assert np.exp(poisson_log_cdf(9, np.array([5.0])))[0] == pytest.approx(0.9681719, abs=1e-7)


@pytest.mark.parametrize("rate", [0.5, 5.0, 50.0])
def test_censored_probability_matches_direct_sum(rate):
    direct = sum(stats.poisson.pmf(k, rate) for k in range(10))
    assert np.exp(poisson_log_cdf(9, np.array([rate])))[0] == pytest.approx(direct, rel=1e-10)


def test_censored_probability_large_threshold():
    expected = stats.poisson.logcdf(60, np.array([55.0, 80.0]))
    np.testing.assert_allclose(poisson_log_cdf(60, np.array([55.0, 80.0])), expected, rtol=1e-9)


def test_lognormal_moment_matching():
    u, v_sq = lognormal_moment_params(0.05, 0.01)
    assert v_sq == pytest.approx(0.0392207, abs=1e-7)
    assert u == pytest.approx(-3.0153427, abs=1e-7)
    # the implied distribution has the requested mean
    assert np.exp(u + v_sq / 2.0) == pytest.approx(0.05)


def test_lognormal_rejects_non_positive_mean():
    with pytest.raises(DomainError):
        lognormal_moment_params(0.0, 0.01)


def test_baseline_prevalence_transform():
    assert expit(-2.90) == pytest.approx(0.0522, abs=1e-4)


def test_layout_names_follow_blocks(small_ds):
    data = ModelData.build(small_ds, ModelConfig())
    layout = ParameterLayout.build(data, ModelConfig())
    names = layout.names()
    assert len(names) == layout.dim
    assert names[0] == "beta0_p"
    assert "beta_p[x1]" in names and "b_m[S01]" in names
    assert "gamma" in names
    assert any(n.startswith("sigma_shared[") for n in names)


def test_reduced_model_drops_prevalence_intercept(small_ds):
    full = ModelConfig()
    data = ModelData.build(small_ds, full)
    full_layout = ParameterLayout.build(data, full)
    reduced_layout = ParameterLayout.build(data, full.reduced())
    assert not reduced_layout.has("b_p") and not reduced_layout.has("sigma0_p")
    assert reduced_layout.dim == full_layout.dim - len(small_ds.state_ids) - 1


def test_holdout_masks_keep_the_layout(small_ds):
    cfg = ModelConfig()
    held_deaths = small_ds.county_ids[:5]
    held_est = [e.county_id for e in small_ds.county_estimates[:3]]
    data = ModelData.build(small_ds, cfg)
    masked = ModelData.build(small_ds, cfg, held_deaths, held_est)
    assert ParameterLayout.build(masked, cfg).names() == ParameterLayout.build(data, cfg).names()
    assert (~masked.death_mask).sum() == 5
    assert (~masked.est_mask).sum() == 3


def test_fully_masked_deaths_contribute_nothing(small_ds):
    cfg = ModelConfig()
    data = ModelData.build(small_ds, cfg, holdout_deaths=small_ds.county_ids)
    z = np.random.default_rng(0).normal(0.0, 0.3, ParameterLayout.build(data, cfg).dim)
    terms = log_posterior_terms(z, data, cfg)
    assert terms["deaths"] == 0.0
    assert np.isfinite(sum(terms.values()))


def test_unknown_model_covariate(small_ds):
    with pytest.raises(ModelConfigurationError):
        ModelData.build(small_ds, ModelConfig(prevalence_covariates=["nope"]))


def test_transform_round_trip(small_ds):
    cfg = ModelConfig()
    data = ModelData.build(small_ds, cfg)
    layout = ParameterLayout.build(data, cfg)
    z = np.random.default_rng(1).normal(0.0, 0.7, layout.dim)
    theta, log_jac = from_unconstrained(z, layout)
    assert np.isfinite(log_jac)
    assert theta.gamma > 0 and np.all(theta.r > 0) and np.all(theta.r < 1)
    np.testing.assert_allclose(to_unconstrained(theta, layout), z, atol=1e-10)
    again = ParameterVector.from_flat(theta.flatten(layout), layout)
    np.testing.assert_allclose(again.flatten(layout), theta.flatten(layout))


def test_negative_gamma_is_outside_the_domain(small_ds):
    cfg = ModelConfig()
    data = ModelData.build(small_ds, cfg)
    layout = ParameterLayout.build(data, cfg)
    theta, _ = from_unconstrained(np.zeros(layout.dim), layout)
    with pytest.raises(DomainError):
        to_unconstrained(dataclasses.replace(theta, gamma=-1.0), layout)


def test_unit_interval_gamma_stays_below_one(small_ds):
    cfg = ModelConfig(gamma_constraint=GammaConstraint.UNIT_INTERVAL)
    data = ModelData.build(small_ds, cfg)
    layout = ParameterLayout.build(data, cfg)
    z = np.zeros(layout.dim)
    z[layout.slices["gamma"]] = 8.0
    theta, _ = from_unconstrained(z, layout)
    assert 0.0 < theta.gamma < 1.0


CONFIGS = [
    ModelConfig(),
    ModelConfig().reduced(),
    ModelConfig(gamma_constraint=GammaConstraint.UNIT_INTERVAL),
    ModelConfig(ratio_source=RatioSource.COUNTY_ESTIMATES, include_mortality_random_intercept=False),
    ModelConfig(prior=PriorSpec(
        intercept_sd=2.5, random_effect_scale=2.5,
        horseshoe=HorseshoeSpec(family=HorseshoeFamily.HALF_NORMAL, scale=0.5),
    )),
]


@pytest.fixture(scope="module")
def gradient_ds():
    spec = SyntheticSpec(n_counties=50, n_states=5, n_covariates=2, evidence_states=2, shared_sd_states=1,
                         population_min=20_000, population_max=400_000, seed=17)
    return simulate_synthetic(spec).dataset


@pytest.mark.parametrize("cfg", CONFIGS)
def test_gradient_matches_finite_differences(gradient_ds, cfg):
    data = ModelData.build(gradient_ds, cfg, holdout_deaths=gradient_ds.county_ids[:3])
    layout = ParameterLayout.build(data, cfg)
    rng = np.random.default_rng(3)
    for _ in range(10):
        z = rng.normal(0.0, 0.3, layout.dim)
        # centre the intercepts near plausible rates
        z[layout.slices["beta0_p"]] += -2.9
        z[layout.slices["beta0_m"]] += -6.0
        value, grad = log_posterior_and_gradient(z, data, cfg, layout)
        assert np.isfinite(value)
        numeric = _finite_difference(lambda x: log_posterior_and_gradient(x, data, cfg, layout)[0], z, h=1e-6)
        relative = np.abs(grad - numeric) / np.maximum(np.abs(numeric), 1.0)
        assert relative.max() < 1e-5, layout.names()[int(relative.argmax())]


def test_target_is_the_sum_of_terms(small_ds):
    cfg = ModelConfig()
    target = PosteriorTarget(ModelData.build(small_ds, cfg), cfg)
    z = np.random.default_rng(5).normal(0.0, 0.4, target.dim)
    value, _ = target(z)
    terms = log_posterior_terms(z, target.data, cfg, target.layout)
    assert value == pytest.approx(sum(terms.values()))


def test_overflow_is_reported_as_minus_infinity(small_ds):
    cfg = ModelConfig()
    target = PosteriorTarget(ModelData.build(small_ds, cfg), cfg)
    value, grad = target(np.full(target.dim, 1e6))
    assert value == -np.inf
    assert np.all(grad == 0.0)
