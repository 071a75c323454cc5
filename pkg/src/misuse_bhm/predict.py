"""
ABOUTME: Posterior predictive quantities: county rates, predictive deaths and prevalence observables
ABOUTME: Draw-wise state/national aggregates, head counts, survey ratios and suppression probabilities
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from scipy.special import expit, pdtr

from .exceptions import ModelConfigurationError, ValidationError
from .inference import DrawSet
from .model import ModelData, ParameterLayout
from .models import Dataset, ModelConfig

logger = logging.getLogger(__name__)

PREDICTION_COLUMNS = [
    "county_id", "state_id", "prev_mean", "prev_sd", "prev_p2.5", "prev_p97.5",
    "deaths_pred_mean", "deaths_p2.5", "deaths_p97.5", "p_suppressed",
]
AGGREGATE_COLUMNS = [
    "level", "id", "population", "prev_mean", "prev_sd", "prev_p2.5", "prev_p50", "prev_p97.5",
    "count_mean", "count_p2.5", "count_p97.5",
    "survey_ratio_mean", "survey_ratio_p2.5", "survey_ratio_p97.5",
]


@dataclass
class PosteriorRates:
    """Draw-wise county rates; arrays are (draws, counties)."""

    data: ModelData
    layout: ParameterLayout
    pooled: np.ndarray
    p: np.ndarray
    m: np.ndarray

    def block(self, name: str) -> np.ndarray:
        return self.pooled[:, self.layout.slices[name]]

    @property
    def expected_deaths(self) -> np.ndarray:
        return self.m * self.p * self.data.population


def model_config_of(drawset: DrawSet) -> ModelConfig:
    return ModelConfig.model_validate(drawset.metadata.get("model", {}))


def posterior_rates(drawset: DrawSet, ds: Dataset, mcfg: Optional[ModelConfig] = None) -> PosteriorRates:
    mcfg = mcfg or model_config_of(drawset)
    data = ModelData.build(ds, mcfg)
    layout = ParameterLayout.build(data, mcfg)
    if layout.names() != list(drawset.names):
        raise ValidationError("draw set parameters do not match the dataset and model configuration")
    pooled = drawset.pooled()
    s = layout.slices

    def eta(part: str, x: np.ndarray) -> np.ndarray:
        out = pooled[:, s[f"beta0_{part}"]] + pooled[:, s[f"beta_{part}"]] @ x.T
        if layout.has(f"b_{part}"):
            out = out + pooled[:, s[f"b_{part}"]][:, data.state_index]
        return out

    return PosteriorRates(
        data=data, layout=layout, pooled=pooled,
        p=expit(eta("p", data.x_p)), m=expit(eta("m", data.x_m)),
    )


def predictive_deaths(drawset: DrawSet, ds: Dataset, seed: int = 0,
                      rates: Optional[PosteriorRates] = None) -> np.ndarray:
    """One Poisson(m p N) death count per (draw, county)."""
    rates = rates or posterior_rates(drawset, ds)
    rng = np.random.default_rng(seed)
    return rng.poisson(rates.expected_deaths).astype(float)


def _lognormal_draws(mean: np.ndarray, sd: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    mean = np.maximum(mean, np.finfo(float).tiny)
    v_sq = np.log1p((sd / mean) ** 2)
    u = np.log(mean) - 0.5 * v_sq
    return np.exp(u + np.sqrt(v_sq) * rng.standard_normal(mean.shape))


def county_estimate_means(rates: PosteriorRates) -> np.ndarray:
    """Draw-wise p_i * r_s for every county-estimate row, (draws, estimates)."""
    data = rates.data
    slot = data.ratio_slot[data.est_state]
    if (slot < 0).any():
        raise ModelConfigurationError("county prediction requested in a state without an OUD ratio")
    return rates.p[:, data.est_county] * rates.block("r")[:, slot]


def _by_state(values: np.ndarray, data: ModelData) -> np.ndarray:
    """Sum county columns within each state, (draws, states)."""
    membership = np.zeros((data.n_counties, data.n_states))
    membership[np.arange(data.n_counties), data.state_index] = 1.0
    return values @ membership


def state_means(rates: PosteriorRates) -> np.ndarray:
    """Draw-wise population-weighted state prevalence, (draws, states)."""
    return _by_state(rates.p * rates.data.population, rates.data) / rates.data.state_population


def predictive_prevalence(drawset: DrawSet, ds: Dataset, seed: int = 0,
                          rates: Optional[PosteriorRates] = None) -> Dict[str, np.ndarray]:
    """Predictive draws of the county-estimate and state-survey observables."""
    rates = rates or posterior_rates(drawset, ds)
    data = rates.data
    rng = np.random.default_rng(seed)
    out: Dict[str, np.ndarray] = {}

    if data.est_y.size:
        mean = county_estimate_means(rates)
        sd = np.broadcast_to(np.maximum(np.nan_to_num(data.est_sd), data.min_sd), mean.shape).copy()
        shared = data.est_group >= 0
        if shared.any():
            sigma = rates.block("sigma_shared")[:, data.est_group[shared]]
            sd[:, shared] = np.maximum(sigma, data.min_sd)
        out["county"] = _lognormal_draws(mean, sd, rng)
    else:
        out["county"] = np.zeros((rates.p.shape[0], 0))

    if data.ev_state.size:
        mean = rates.block("gamma")[:, :1] * state_means(rates)[:, data.ev_state]
        sd = np.broadcast_to(np.maximum(data.ev_sd, data.min_sd), mean.shape)
        out["state"] = _lognormal_draws(mean, sd, rng)
    else:
        out["state"] = np.zeros((rates.p.shape[0], 0))
    return out


def _summaries(values: np.ndarray, prefix: str) -> Dict[str, np.ndarray]:
    lo, mid, hi = np.percentile(values, [2.5, 50.0, 97.5], axis=0)
    return {
        f"{prefix}_mean": values.mean(axis=0),
        f"{prefix}_sd": values.std(axis=0, ddof=1) if values.shape[0] > 1 else np.zeros(values.shape[1]),
        f"{prefix}_p2.5": lo,
        f"{prefix}_p50": mid,
        f"{prefix}_p97.5": hi,
    }


def national_and_state_aggregates(drawset: DrawSet, ds: Dataset,
                                  rates: Optional[PosteriorRates] = None) -> pd.DataFrame:
    """State and national rows of draw-wise sum(p N) / sum(N) plus head counts."""
    rates = rates or posterior_rates(drawset, ds)
    data = rates.data
    counts = rates.p * data.population
    state_counts = _by_state(counts, data)
    state_prev = state_counts / data.state_population
    national_count = counts.sum(axis=1, keepdims=True)
    national_prev = national_count / data.population.sum()

    prev = np.hstack([state_prev, national_prev])
    heads = np.hstack([state_counts, national_count])
    ps, cs = _summaries(prev, "prev"), _summaries(heads, "count")

    ratio_cols = {k: np.full(prev.shape[1], np.nan) for k in
                  ("survey_ratio_mean", "survey_ratio_p2.5", "survey_ratio_p97.5")}
    for v, s in enumerate(data.ev_state):
        ratio = data.ev_y[v] / state_prev[:, s]
        lo, hi = np.percentile(ratio, [2.5, 97.5])
        ratio_cols["survey_ratio_mean"][s] = ratio.mean()
        ratio_cols["survey_ratio_p2.5"][s] = lo
        ratio_cols["survey_ratio_p97.5"][s] = hi

    frame = pd.DataFrame({
        "level": ["state"] * data.n_states + ["national"],
        "id": list(data.state_ids) + ["national"],
        "population": np.append(data.state_population, data.population.sum()),
        **{k: ps[k] for k in ("prev_mean", "prev_sd", "prev_p2.5", "prev_p50", "prev_p97.5")},
        "count_mean": cs["count_mean"],
        "count_p2.5": cs["count_p2.5"],
        "count_p97.5": cs["count_p97.5"],
        **ratio_cols,
    })
    return frame[AGGREGATE_COLUMNS]


def suppression_probabilities(rates: PosteriorRates, threshold: int) -> np.ndarray:
    """Per county, the draw-average of P(D <= c | rate)."""
    return pdtr(threshold, rates.expected_deaths).mean(axis=0)


def suppression_probability(drawset: DrawSet, ds: Dataset, county: str,
                            rates: Optional[PosteriorRates] = None) -> float:
    rates = rates or posterior_rates(drawset, ds)
    if county not in rates.data.county_ids:
        raise ValidationError(f"unknown county {county!r}")
    i = rates.data.county_ids.index(county)
    lam = rates.expected_deaths[:, i]
    return float(np.mean(pdtr(ds.suppression_threshold, lam)))


def prediction_table(drawset: DrawSet, ds: Dataset, seed: int = 0,
                     rates: Optional[PosteriorRates] = None) -> pd.DataFrame:
    """One row per county: prevalence summary, predictive deaths, suppression probability."""
    rates = rates or posterior_rates(drawset, ds)
    deaths = predictive_deaths(drawset, ds, seed, rates)
    ps = _summaries(rates.p, "prev")
    d_lo, d_hi = np.percentile(deaths, [2.5, 97.5], axis=0)
    frame = pd.DataFrame({
        "county_id": rates.data.county_ids,
        "state_id": [rates.data.state_ids[s] for s in rates.data.state_index],
        "prev_mean": ps["prev_mean"],
        "prev_sd": ps["prev_sd"],
        "prev_p2.5": ps["prev_p2.5"],
        "prev_p97.5": ps["prev_p97.5"],
        "deaths_pred_mean": deaths.mean(axis=0),
        "deaths_p2.5": d_lo,
        "deaths_p97.5": d_hi,
        "p_suppressed": suppression_probabilities(rates, ds.suppression_threshold),
    })
    return frame[PREDICTION_COLUMNS]


def suppression_summary(predictions: pd.DataFrame, ds: Dataset, level: float = 0.95) -> Dict[str, Any]:
    """How well suppressed counties are predicted to fall below the threshold."""
    suppressed = {c.county_id for c in ds.counties if c.suppressed}
    rows = predictions[predictions["county_id"].isin(suppressed)]
    if rows.empty:
        return {"n_suppressed": 0, "mean_p_suppressed": None, "share_above_level": None, "level": level}
    return {
        "n_suppressed": int(len(rows)),
        "mean_p_suppressed": float(rows["p_suppressed"].mean()),
        "share_above_level": float((rows["p_suppressed"] >= level).mean()),
        "level": level,
    }
