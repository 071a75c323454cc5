"""
ABOUTME: Hand-worked values for each likelihood block and the prior, checked against scipy densities
ABOUTME: Uses tiny literal datasets so every expected number can be derived by hand
"""

import dataclasses

import numpy as np
import pytest
from scipy import stats
from scipy.special import logit

from misuse_bhm.inference import fit
from misuse_bhm.model import (
    ModelData,
    ParameterLayout,
    county_rates,
    from_unconstrained,
    log_prior,
    loglik_county_prev,
    loglik_deaths,
    loglik_state_prev,
    lognormal_moment_params,
)
from misuse_bhm.models import (
    CountyPrevEstimate,
    CountyRecord,
    Dataset,
    HorseshoeSpec,
    ModelConfig,
    PriorSpec,
    SamplerConfig,
    SdMode,
    StateEvidence,
)

NO_INTERCEPTS = ModelConfig(include_prevalence_random_intercept=False, include_mortality_random_intercept=False)


def _theta(ds, cfg=NO_INTERCEPTS, **values):
    """Parameters at the zero unconstrained point, with the given fields overridden."""
    data = ModelData.build(ds, cfg)
    layout = ParameterLayout.build(data, cfg)
    theta, _ = from_unconstrained(np.zeros(layout.dim), layout)
    return data, dataclasses.replace(theta, **values)


def _county(county_id="C1", state_id="S1", population=8, deaths=0, covariates=()):
    return CountyRecord(county_id=county_id, state_id=state_id, population=population, deaths=deaths,
                        suppressed=deaths is None, covariates=covariates)


def test_zero_deaths_at_rate_two():
    ds = Dataset(counties=(_county(population=8, deaths=0),))
    data, theta = _theta(ds)
    # p = m = 1/2 so the expected count is 8 / 4
    assert loglik_deaths(theta, data) == pytest.approx(-2.0, abs=1e-12)


def test_suppressed_with_zero_threshold_is_minus_the_rate():
    ds = Dataset(counties=(_county(population=20, deaths=None),), suppression_threshold=0)
    data, theta = _theta(ds)
    assert loglik_deaths(theta, data) == pytest.approx(-5.0, abs=1e-12)


def test_observed_deaths_match_the_poisson_pmf():
    ds = Dataset(counties=(_county(population=400, deaths=93), _county("C2", population=40, deaths=None)))
    data, theta = _theta(ds)
    expected = stats.poisson.logpmf(93, 100.0) + stats.poisson.logcdf(9, 10.0)
    assert loglik_deaths(theta, data) == pytest.approx(expected, rel=1e-10)


def _estimate_ds(**estimate):
    fields = dict(county_id="C1", prev_est=0.05, ci_lower=0.0304, ci_upper=0.0696)
    fields.update(estimate)
    return Dataset(counties=(_county(population=1000, deaths=1),),
                   county_estimates=(CountyPrevEstimate(**fields),))


def test_county_estimate_term_is_the_moment_matched_lognormal():
    data, theta = _theta(_estimate_ds(), beta0_p=float(logit(0.1)))
    assert theta.r[0] == pytest.approx(0.5)
    # CI width 0.0392 over 2 * 1.96 gives sd 0.01 around a modelled mean of 0.1 * 0.5
    u, v_sq = lognormal_moment_params(0.05, 0.01)
    expected = stats.lognorm.logpdf(0.05, s=np.sqrt(v_sq), scale=np.exp(u))
    assert loglik_county_prev(theta, data, NO_INTERCEPTS) == pytest.approx(expected, rel=1e-9)


def test_larger_shared_sd_lowers_the_density_at_the_mean():
    ds = _estimate_ds(ci_lower=None, ci_upper=None, sd_mode=SdMode.SHARED, sd_group="G1")
    values = []
    for sd in (0.01, 0.02):
        data, theta = _theta(ds, beta0_p=float(logit(0.1)), sigma_shared=np.array([sd]))
        u, v_sq = lognormal_moment_params(0.05, sd)
        value = loglik_county_prev(theta, data, NO_INTERCEPTS)
        assert value == pytest.approx(stats.lognorm.logpdf(0.05, s=np.sqrt(v_sq), scale=np.exp(u)), rel=1e-9)
        values.append(value)
    assert values[1] < values[0]


def _state_ds(q_misuse=50, q_oud=30):
    counties = (_county("C1", population=100, deaths=0), _county("C2", population=300, deaths=0))
    evidence = StateEvidence(state_id="S1", prev_est=0.01, ci_lower=0.008, ci_upper=0.012,
                             q_misuse=q_misuse, q_oud=q_oud)
    return Dataset(counties=counties, state_evidence=(evidence,))


def test_state_term_scales_the_weighted_prevalence_by_gamma():
    data, theta = _theta(_state_ds(), beta0_p=float(logit(0.05)), gamma=0.21, r=np.array([0.6]))
    u, v_sq = lognormal_moment_params(0.21 * 0.05, 0.004 / (2.0 * 1.96))
    lognormal = stats.lognorm.logpdf(0.01, s=np.sqrt(v_sq), scale=np.exp(u))
    binomial = stats.binom.logpmf(30, 50, 0.6)
    assert loglik_state_prev(theta, data, NO_INTERCEPTS) == pytest.approx(lognormal + binomial, rel=1e-9)


def test_certain_ratio_with_all_misusers_having_oud_adds_nothing():
    data, theta = _theta(_state_ds(q_misuse=40, q_oud=40), beta0_p=float(logit(0.05)),
                         gamma=0.21, r=np.array([1.0]))
    u, v_sq = lognormal_moment_params(0.0105, 0.004 / (2.0 * 1.96))
    lognormal = stats.lognorm.logpdf(0.01, s=np.sqrt(v_sq), scale=np.exp(u))
    assert loglik_state_prev(theta, data, NO_INTERCEPTS) == pytest.approx(lognormal, rel=1e-10)


def test_prior_at_the_zero_point_has_a_closed_form():
    counties = (_county("C1", "S1", 1000, 1, (0.5,)), _county("C2", "S2", 1000, 2, (-0.5,)))
    evidence = StateEvidence(state_id="S1", prev_est=0.01, ci_lower=0.008, ci_upper=0.012, q_misuse=50, q_oud=30)
    ds = Dataset(counties=counties, state_evidence=(evidence,), covariate_names=("x1",))
    cfg = ModelConfig(prior=PriorSpec(intercept_sd=1.0, halfnormal_scale=1.0, horseshoe=HorseshoeSpec(scale=1.0)))
    _, theta = _theta(ds, cfg)

    normal0 = stats.norm.logpdf(0.0)
    cauchy1 = stats.halfcauchy.logpdf(1.0)
    halfnorm1 = stats.halfnorm.logpdf(1.0)
    # intercepts; beta, lambda, zeta, tau per effect block; sigma and two state effects per
    # random intercept; gamma; one OUD ratio at 1/2
    expected = 2 * normal0
    expected += 2 * (normal0 + 3 * cauchy1)
    expected += 2 * (halfnorm1 + 2 * normal0)
    expected += halfnorm1 + stats.halfnorm.logpdf(0.5)
    assert log_prior(theta, cfg) == pytest.approx(expected, rel=1e-12)


def test_reduced_model_matches_full_model_with_zero_prevalence_effects():
    counties = (_county("C1", "S1", 5000, 3), _county("C2", "S2", 8000, None), _county("C3", "S2", 2000, 12))
    estimate = CountyPrevEstimate(county_id="C3", prev_est=0.03, ci_lower=0.02, ci_upper=0.04)
    evidence = StateEvidence(state_id="S2", prev_est=0.05, ci_lower=0.04, ci_upper=0.06, q_misuse=80, q_oud=20)
    ds = Dataset(counties=counties, county_estimates=(estimate,), state_evidence=(evidence,))
    full, reduced = ModelConfig(), ModelConfig().reduced()
    shared = dict(beta0_p=-2.5, beta0_m=-5.0, b_m=np.array([0.3, -0.2]), gamma=0.4, r=np.array([0.3]))
    full_data, full_theta = _theta(ds, full, b_p=np.zeros(2), sigma0_p=0.7, **shared)
    red_data, red_theta = _theta(ds, reduced, **shared)
    assert loglik_deaths(full_theta, full_data) == pytest.approx(loglik_deaths(red_theta, red_data), rel=1e-14)
    assert loglik_county_prev(full_theta, full_data, full) == pytest.approx(
        loglik_county_prev(red_theta, red_data, reduced), rel=1e-14)
    assert loglik_state_prev(full_theta, full_data, full) == pytest.approx(
        loglik_state_prev(red_theta, red_data, reduced), rel=1e-14)


def test_prevalence_rises_with_its_intercept():
    ds = Dataset(counties=(_county(population=1000, deaths=1),))
    data, theta = _theta(ds)
    assert county_rates(theta, data).p[0] == pytest.approx(0.5)
    assert county_rates(theta, data).m[0] == pytest.approx(0.5)
    prevalence = [county_rates(dataclasses.replace(theta, beta0_p=b), data).p[0] for b in (-4.0, -2.9, 0.0, 1.5)]
    assert all(a < b for a, b in zip(prevalence, prevalence[1:]))
    baseline = county_rates(dataclasses.replace(theta, beta0_m=-6.01), data).m[0]
    assert baseline == pytest.approx(0.00245, rel=1e-2)


@pytest.mark.slow
def test_prior_only_fit_recovers_the_intercept_prior():
    counties = tuple(_county(f"C{i}", population=1000, deaths=i) for i in range(1, 4))
    ds = Dataset(counties=counties)
    scfg = SamplerConfig(chains=4, iterations=3000, warmup=1000, thin=1, seed=31)
    drawset = fit(ds, NO_INTERCEPTS, scfg, holdout_deaths=ds.county_ids)
    beta0_p = drawset.chains_of("beta0_p").ravel()
    assert beta0_p.std() == pytest.approx(10.0, rel=0.15)
    assert abs(beta0_p.mean()) < 1.5
