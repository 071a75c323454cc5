"""
ABOUTME: Tests for posterior predictions: aggregates, suppression probabilities and predictive observables
"""

import numpy as np
import pytest
from scipy.special import logit

from misuse_bhm.exceptions import ValidationError
from misuse_bhm.inference import DrawSet
from misuse_bhm.model import ModelData, ParameterLayout
from misuse_bhm.models import CountyRecord, Dataset, ModelConfig
from misuse_bhm.predict import (
    AGGREGATE_COLUMNS,
    PREDICTION_COLUMNS,
    national_and_state_aggregates,
    posterior_rates,
    predictive_deaths,
    predictive_prevalence,
    prediction_table,
    suppression_probability,
    suppression_summary,
)

MCFG = ModelConfig(include_mortality_random_intercept=False)


@pytest.fixture
def two_county_ds():
    return Dataset(counties=(
        CountyRecord(county_id="A", state_id="S1", population=100, deaths=2),
        CountyRecord(county_id="B", state_id="S2", population=300, deaths=None, suppressed=True),
    ))


@pytest.fixture
def fixed_draws(two_county_ds):
    """Point-mass posterior: p = 0.03 in S1, p = 0.05 in S2, m = 1/3."""
    data = ModelData.build(two_county_ds, MCFG)
    layout = ParameterLayout.build(data, MCFG)
    values = {"beta0_p": 0.0, "b_p[S1]": logit(0.03), "b_p[S2]": logit(0.05),
              "sigma0_p": 0.5, "beta0_m": logit(1.0 / 3.0), "gamma": 0.2}
    row = np.array([values[name] for name in layout.names()])
    draws = np.broadcast_to(row, (2, 5, row.size)).copy()
    return DrawSet(names=layout.names(), draws=draws, metadata={"model": MCFG.model_dump(mode="json")})


def test_state_and_national_aggregates(fixed_draws, two_county_ds):
    table = national_and_state_aggregates(fixed_draws, two_county_ds)
    assert list(table.columns) == AGGREGATE_COLUMNS
    rows = table.set_index("id")
    assert rows.loc["S1", "prev_mean"] == pytest.approx(0.03)
    assert rows.loc["S2", "prev_mean"] == pytest.approx(0.05)
    # (3 + 15) / 400
    assert rows.loc["national", "prev_mean"] == pytest.approx(0.045)
    assert rows.loc["national", "count_mean"] == pytest.approx(18.0)
    assert rows.loc["national", "population"] == 400


def test_suppression_probability_matches_poisson_cdf(fixed_draws, two_county_ds):
    # B has expected deaths 1/3 * 0.05 * 300 = 5
    assert suppression_probability(fixed_draws, two_county_ds, "B") == pytest.approx(0.9681719, abs=1e-7)
    with pytest.raises(ValidationError):
        suppression_probability(fixed_draws, two_county_ds, "Z")


def test_prediction_table_and_suppression_summary(fixed_draws, two_county_ds):
    table = prediction_table(fixed_draws, two_county_ds, seed=1)
    assert list(table.columns) == PREDICTION_COLUMNS
    assert table["prev_mean"].tolist() == pytest.approx([0.03, 0.05])
    summary = suppression_summary(table, two_county_ds)
    assert summary["n_suppressed"] == 1
    assert summary["mean_p_suppressed"] == pytest.approx(0.9681719, abs=1e-7)
    assert summary["share_above_level"] == 1.0


def test_predictive_deaths_are_seeded(fixed_draws, two_county_ds):
    a = predictive_deaths(fixed_draws, two_county_ds, seed=3)
    b = predictive_deaths(fixed_draws, two_county_ds, seed=3)
    assert a.shape == (10, 2)
    np.testing.assert_array_equal(a, b)


def test_mismatched_draws_are_rejected(fixed_draws, small_ds):
    with pytest.raises(ValidationError):
        posterior_rates(fixed_draws, small_ds)


def test_predictive_prevalence_shapes(fitted, small_ds):
    draws = predictive_prevalence(fitted, small_ds, seed=0)
    assert draws["county"].shape == (fitted.n_total, len(small_ds.county_estimates))
    assert draws["state"].shape == (fitted.n_total, len(small_ds.state_evidence))
    assert np.all(draws["county"] > 0) and np.all(draws["state"] > 0)


def test_aggregates_on_a_fitted_run(fitted, small_ds):
    table = national_and_state_aggregates(fitted, small_ds)
    assert len(table) == len(small_ds.state_ids) + 1
    assert (table["prev_p2.5"] <= table["prev_mean"]).all()
    assert (table["prev_mean"] <= table["prev_p97.5"]).all()
    evidence = table[table["level"] == "state"]["survey_ratio_mean"]
    assert evidence.notna().sum() == len(small_ds.state_evidence)
