"""
ABOUTME: Tests for input ingestion, integrity checks, imputation, standardization and persistence
"""

import numpy as np
import pytest

from misuse_bhm.data import (
    apply_standardization,
    dataset_hash,
    impute_missing,
    load_dataset,
    load_external_estimates,
    load_prepared,
    load_state_totals,
    prepare_dataset,
    sd_from_ci,
    standardize_covariates,
    write_dataset,
)
from misuse_bhm.exceptions import (
    DataParseError,
    DegenerateCovariateError,
    DomainError,
    IntegrityError,
    UnusableCovariateError,
)
from misuse_bhm.models import PrepConfig, SdMode
from misuse_bhm.utils.files import read_header, read_json

COUNTIES = """county_id,state_id,population,deaths,suppressed,x1,x2
A1,S1,1000,12,0,1.0,5
A2,S1,2000,,1,2.0,
A3,S2,3000,15,0,3.0,7
A4,S2,4000,20,0,,9
"""

STATES = """state_id,prev_est,ci_lower,ci_upper,q_misuse,q_oud
S1,0.01,0.008,0.012,100,40
S2,0.02,0.015,0.025,80,30
"""

COUNTY_PREV = """county_id,prev_est,ci_lower,ci_upper,sd_mode,sd_group
A1,0.01,0.008,0.012,from_ci,
A3,0.02,,,shared,G1
"""


@pytest.fixture
def tables(write_csv_text):
    return (
        write_csv_text("counties.csv", COUNTIES),
        write_csv_text("state_evidence.csv", STATES),
        write_csv_text("county_prev.csv", COUNTY_PREV),
    )


@pytest.fixture
def raw_ds(tables):
    return load_dataset(*tables)


def test_sd_from_ci():
    assert sd_from_ci(0.02, 0.06) == pytest.approx(0.04 / 3.92)
    assert sd_from_ci(0.05, 0.05) == 0.0


def test_sd_from_ci_rejects_reversed_bounds():
    with pytest.raises(DomainError):
        sd_from_ci(0.06, 0.02)


def test_load_dataset_parses_all_tables(raw_ds):
    assert raw_ds.county_ids == ["A1", "A2", "A3", "A4"]
    assert raw_ds.state_ids == ["S1", "S2"]
    assert raw_ds.covariate_names == ("x1", "x2")

    suppressed = raw_ds.counties[1]
    assert suppressed.suppressed and suppressed.deaths is None
    assert suppressed.covariates == (2.0, None)

    assert len(raw_ds.state_evidence) == 2
    shared = raw_ds.county_estimates[1]
    assert shared.sd_mode == SdMode.SHARED
    assert shared.sd_group == "G1"
    assert raw_ds.shared_sd_groups == ["G1"]


def test_malformed_row_reports_file_and_line(write_csv_text, tables):
    bad = write_csv_text("bad.csv", COUNTIES.replace("A3,S2,3000", "A3,S2,abc"))
    with pytest.raises(DataParseError) as exc:
        load_dataset(bad, tables[1], tables[2])
    assert exc.value.line == 4
    assert f"{bad}:4:" in str(exc.value)


def test_malformed_row_line_counts_the_metadata_line(write_csv_text, tables):
    stamped = "# config_hash=abc,seed=3\n" + COUNTIES.replace("A3,S2,3000", "A3,S2,abc")
    bad = write_csv_text("bad.csv", stamped)
    with pytest.raises(DataParseError) as exc:
        load_dataset(bad, tables[1], tables[2])
    assert exc.value.line == 5


def test_blank_rows_keep_line_numbers(write_csv_text):
    text = COUNTIES.replace("A2,S1,2000,,1,2.0,\n", "A2,S1,2000,,1,2.0,\n\n").replace("A4,S2,4000", "A4,S2,x")
    bad = write_csv_text("bad.csv", text)
    with pytest.raises(DataParseError) as exc:
        load_dataset(bad, None, None)
    assert exc.value.line == 6


def test_hash_inside_a_field_is_kept(write_csv_text):
    counties = write_csv_text("counties.csv", COUNTIES.replace("A1,S1", "A#1,S#1").replace("A2,S1", "A2,S#1"))
    ds = load_dataset(counties, None, None)
    assert ds.county_ids[0] == "A#1"
    assert ds.counties[0].deaths == 12
    assert ds.state_ids == ["S#1", "S2"]


def test_deaths_with_suppressed_flag_is_rejected(write_csv_text):
    bad = write_csv_text("bad.csv", COUNTIES.replace("A1,S1,1000,12,0", "A1,S1,1000,12,1"))
    with pytest.raises(DataParseError) as exc:
        load_dataset(bad, None, None)
    assert exc.value.line == 2


def test_missing_column_is_a_parse_error(write_csv_text):
    bad = write_csv_text("bad.csv", "county_id,state_id,population\nA1,S1,10\n")
    with pytest.raises(DataParseError):
        load_dataset(bad, None, None)


def test_missing_file_names_the_path(tmp_path):
    missing = tmp_path / "nope.csv"
    with pytest.raises(DataParseError, match="nope.csv"):
        load_dataset(missing, None, None)


def test_state_evidence_for_unknown_state(write_csv_text, tables):
    states = write_csv_text("states.csv", STATES + "S9,0.02,0.015,0.025,80,30\n")
    with pytest.raises(IntegrityError, match="S9"):
        load_dataset(tables[0], states, None)


def test_duplicate_county_is_rejected(write_csv_text):
    dup = write_csv_text("dup.csv", COUNTIES + "A1,S2,10,1,0,1.0,1\n")
    with pytest.raises(IntegrityError, match="duplicate"):
        load_dataset(dup, None, None)


def test_estimate_for_unknown_county(write_csv_text, tables):
    prev = write_csv_text("prev.csv", COUNTY_PREV + "Z9,0.02,0.01,0.03,from_ci,\n")
    with pytest.raises(IntegrityError, match="Z9"):
        load_dataset(tables[0], None, prev)


def test_impute_missing_uses_state_means(raw_ds):
    imputed = impute_missing(raw_ds)
    matrix = imputed.covariate_matrix()
    assert not np.isnan(matrix).any()
    # A2's x2 from S1 (only A1 observed), A4's x1 from S2 (only A3 observed)
    assert matrix[1, 1] == pytest.approx(5.0)
    assert matrix[3, 0] == pytest.approx(3.0)
    assert imputed.imputed_count == 2


def test_impute_falls_back_to_national_mean(write_csv_text):
    text = """county_id,state_id,population,deaths,suppressed,x1
A1,S1,1000,12,0,1.0
A2,S1,2000,3,0,3.0
A3,S2,3000,15,0,
"""
    ds = impute_missing(load_dataset(write_csv_text("c.csv", text), None, None))
    assert ds.covariate_matrix()[2, 0] == pytest.approx(2.0)


def test_all_missing_covariate_is_unusable(write_csv_text):
    text = """county_id,state_id,population,deaths,suppressed,x1
A1,S1,1000,12,0,
A2,S2,2000,3,0,
"""
    ds = load_dataset(write_csv_text("c.csv", text), None, None)
    with pytest.raises(UnusableCovariateError):
        impute_missing(ds)


def test_standardize_centers_and_scales(raw_ds):
    ds = standardize_covariates(impute_missing(raw_ds))
    matrix = ds.covariate_matrix()
    np.testing.assert_allclose(matrix.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(matrix.std(axis=0, ddof=1), 1.0)
    raw = impute_missing(raw_ds).covariate_matrix()
    np.testing.assert_allclose(apply_standardization(raw, ds), matrix)


def test_constant_covariate_is_degenerate(write_csv_text):
    text = """county_id,state_id,population,deaths,suppressed,x1
A1,S1,1000,12,0,2.0
A2,S2,2000,3,0,2.0
"""
    ds = load_dataset(write_csv_text("c.csv", text), None, None)
    with pytest.raises(DegenerateCovariateError) as exc:
        standardize_covariates(ds)
    assert exc.value.column == "x1"


def test_prepare_respects_threshold_and_subset(tables):
    prep = PrepConfig(suppression_threshold=4, covariates=["x1"])
    ds = prepare_dataset(load_dataset(*tables, config=prep), prep)
    assert ds.covariate_names == ("x1",)
    assert ds.suppression_threshold == 4


def test_write_and_reload_is_lossless(tmp_path, raw_ds):
    ds = prepare_dataset(raw_ds)
    write_dataset(ds, tmp_path / "prepared")
    reloaded = load_prepared(tmp_path / "prepared")
    assert reloaded == ds
    assert dataset_hash(reloaded) == dataset_hash(ds)


def test_write_with_run_metadata_stamps_every_file(tmp_path, raw_ds):
    ds = prepare_dataset(raw_ds)
    meta = {"config_hash": "0123abcd", "seed": 11}
    paths = write_dataset(ds, tmp_path / "prepared", meta)
    for key in ("counties", "state_evidence", "county_prev"):
        assert read_header(paths[key]) == {"config_hash": "0123abcd", "seed": "11"}
    assert read_json(paths["meta"])["meta"] == meta
    assert load_prepared(tmp_path / "prepared") == ds


def test_dataset_hash_changes_with_content(raw_ds):
    changed = raw_ds.model_copy(update={"suppression_threshold": 5})
    assert dataset_hash(changed) != dataset_hash(raw_ds)


def test_load_state_totals_skips_blank_rows(write_csv_text):
    path = write_csv_text("totals.csv", "# seed=1\nstate_id,observed_deaths\nS1,47\nS2,\n")
    assert load_state_totals(path) == {"S1": 47}


def test_load_external_estimates_requires_estimate(write_csv_text):
    good = write_csv_text("ext.csv", "county_id,estimate,ci_lower,ci_upper\nA1,0.01,0.005,0.02\nA2,0.03,,\n")
    frame = load_external_estimates(good)
    assert list(frame["county_id"]) == ["A1", "A2"]
    assert np.isnan(frame.loc[1, "ci_lower"])

    bad = write_csv_text("bad.csv", "county_id,estimate\nA1,0.01\nA2,\n")
    with pytest.raises(DataParseError) as exc:
        load_external_estimates(bad)
    assert exc.value.line == 3
