"""
ABOUTME: Residual analyses that guide the random-effect structure
ABOUTME: Pearson death residuals, per-state mean tests, per-state covariate regressions, prevalence residuals
"""

import logging
from typing import Optional, Union

import numpy as np
import pandas as pd
from scipy import stats

from ..inference import DrawSet
from ..model import ModelData, ParameterLayout, ParameterVector, county_rates, lognormal_moment_params
from ..models import Dataset, ModelConfig
from ..predict import model_config_of

logger = logging.getLogger(__name__)

ALPHA = 0.05
MIN_STATE_COUNTIES = 3


def pearson_residual(observed, expected):
    """(D - lambda) / sqrt(lambda)."""
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return (observed - expected) / np.sqrt(expected)


def _point(source: Union[DrawSet, ParameterVector], ds: Dataset, mcfg: Optional[ModelConfig]):
    if isinstance(source, DrawSet):
        mcfg = mcfg or model_config_of(source)
        data = ModelData.build(ds, mcfg)
        layout = ParameterLayout.build(data, mcfg)
        theta = ParameterVector.from_flat(source.pooled().mean(axis=0), layout)
    else:
        data = ModelData.build(ds, mcfg or ModelConfig())
        theta = source
    return theta, data


def pearson_residuals(source: Union[DrawSet, ParameterVector], ds: Dataset,
                      mcfg: Optional[ModelConfig] = None) -> pd.DataFrame:
    """Residuals of unsuppressed death counts at posterior-mean parameters.

    Counties with zero expected deaths are kept with ``excluded=True``.
    """
    theta, data = _point(source, ds, mcfg)
    rates = county_rates(theta, data)
    expected = rates.m * rates.p * data.population
    keep = ~data.suppressed
    frame = pd.DataFrame({
        "county_id": np.asarray(data.county_ids)[keep],
        "state_id": np.asarray(data.state_ids)[data.state_index[keep]],
        "observed": data.deaths[keep],
        "expected": expected[keep],
    })
    frame["excluded"] = ~(frame["expected"] > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frame["residual"] = np.where(frame["excluded"], np.nan,
                                     pearson_residual(frame["observed"], frame["expected"]))
    if frame["excluded"].any():
        logger.warning("%d counties with zero expected deaths excluded from residuals",
                       int(frame["excluded"].sum()))
    return frame


def state_residual_summary(residuals: pd.DataFrame, min_counties: int = MIN_STATE_COUNTIES,
                           alpha: float = ALPHA) -> pd.DataFrame:
    """Mean residual per state with a t-based interval; significant when it excludes 0."""
    rows = []
    usable = residuals[~residuals["excluded"]]
    for state_id, group in usable.groupby("state_id", sort=False):
        values = group["residual"].to_numpy(dtype=float)
        n = values.size
        if n < min_counties:
            continue
        mean = float(values.mean())
        half = float(stats.t.ppf(1.0 - alpha / 2.0, n - 1) * values.std(ddof=1) / np.sqrt(n))
        rows.append({
            "state_id": state_id,
            "n": n,
            "mean": mean,
            "ci_lower": mean - half,
            "ci_upper": mean + half,
            "significant": bool(mean - half > 0.0 or mean + half < 0.0),
        })
    return pd.DataFrame(rows, columns=["state_id", "n", "mean", "ci_lower", "ci_upper", "significant"])


def _intercept_p(intercept: float, stderr: float, df: int) -> float:
    if stderr == 0.0:
        return 1.0 if intercept == 0.0 else 0.0
    return float(2.0 * stats.t.sf(abs(intercept / stderr), df))


def residual_regression(residuals: pd.DataFrame, ds: Dataset, min_counties: int = MIN_STATE_COUNTIES,
                        alpha: float = ALPHA) -> pd.DataFrame:
    """Univariate OLS of residuals on each covariate, state by state.

    Cells whose covariate is constant within the state are reported with
    ``skipped=True``.
    """
    covariates = pd.DataFrame(ds.covariate_matrix(), columns=list(ds.covariate_names))
    covariates["county_id"] = ds.county_ids
    merged = residuals[~residuals["excluded"]].merge(covariates, on="county_id", how="left")

    rows = []
    for state_id, group in merged.groupby("state_id", sort=False):
        if len(group) < min_counties:
            continue
        y = group["residual"].to_numpy(dtype=float)
        for name in ds.covariate_names:
            x = group[name].to_numpy(dtype=float)
            row = {"state_id": state_id, "covariate": name, "n": len(group)}
            if np.ptp(x) == 0.0:
                rows.append({**row, "skipped": True})
                continue
            fit = stats.linregress(x, y)
            slope_p = 1.0 if np.isnan(fit.pvalue) else float(fit.pvalue)
            intercept_p = _intercept_p(float(fit.intercept), float(fit.intercept_stderr), len(group) - 2)
            rows.append({
                **row,
                "slope": float(fit.slope),
                "slope_p": slope_p,
                "intercept": float(fit.intercept),
                "intercept_p": intercept_p,
                "slope_significant": slope_p < alpha,
                "intercept_significant": intercept_p < alpha,
                "skipped": False,
            })
    columns = ["state_id", "covariate", "n", "slope", "slope_p", "intercept", "intercept_p",
               "slope_significant", "intercept_significant", "skipped"]
    return pd.DataFrame(rows, columns=columns)


def regression_counts(table: pd.DataFrame) -> pd.DataFrame:
    """Per covariate: states tested and states with a significant slope or intercept."""
    tested = table[~table["skipped"].astype(bool)]
    if tested.empty:
        return pd.DataFrame(columns=["covariate", "states", "significant_slopes", "significant_intercepts"])
    grouped = tested.groupby("covariate", sort=False)
    return pd.DataFrame({
        "states": grouped.size(),
        "significant_slopes": grouped["slope_significant"].sum().astype(int),
        "significant_intercepts": grouped["intercept_significant"].sum().astype(int),
    }).reset_index()


def prevalence_residuals(source: Union[DrawSet, ParameterVector], ds: Dataset,
                         mcfg: Optional[ModelConfig] = None) -> pd.DataFrame:
    """Standardized log-scale residuals of county estimates and state surveys."""
    theta, data = _point(source, ds, mcfg)
    p = county_rates(theta, data).p
    rows = []
    for e in range(data.est_y.size):
        i, s = data.est_county[e], data.est_state[e]
        mean = p[i] * theta.r[data.ratio_slot[s]]
        group = data.est_group[e]
        sd = theta.sigma_shared[group] if group >= 0 else data.est_sd[e]
        u, v_sq = lognormal_moment_params(mean, max(sd, data.min_sd))
        rows.append({
            "kind": "county", "unit_id": data.county_ids[i], "state_id": data.state_ids[s],
            "observed": data.est_y[e], "expected": mean,
            "residual": (np.log(data.est_y[e]) - u) / np.sqrt(v_sq),
        })
    weighted = np.bincount(data.state_index, weights=p * data.population, minlength=data.n_states)
    for v in range(data.ev_state.size):
        s = data.ev_state[v]
        mean = theta.gamma * weighted[s] / data.state_population[s]
        u, v_sq = lognormal_moment_params(mean, max(data.ev_sd[v], data.min_sd))
        rows.append({
            "kind": "state", "unit_id": data.state_ids[s], "state_id": data.state_ids[s],
            "observed": data.ev_y[v], "expected": mean,
            "residual": (np.log(data.ev_y[v]) - u) / np.sqrt(v_sq),
        })
    return pd.DataFrame(rows, columns=["kind", "unit_id", "state_id", "observed", "expected", "residual"])
