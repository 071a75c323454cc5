"""
ABOUTME: Forward simulation of a complete input set from known parameters
ABOUTME: Used for parameter recovery, calibration of the CV battery and the residual ladder
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List

import numpy as np
import pandas as pd
from scipy.special import expit

from ..data import CI_Z, write_dataset
from ..models import (
    CountyPrevEstimate,
    CountyRecord,
    Dataset,
    SdMode,
    StateEvidence,
    SyntheticSpec,
)
from ..utils.files import write_csv, write_json

logger = logging.getLogger(__name__)

_PREV_CAP = 0.999


@dataclass
class SyntheticData:
    """A simulated dataset plus everything needed to score a fit against it."""

    dataset: Dataset
    truth: Dict[str, float]
    true_deaths: np.ndarray
    state_totals: pd.DataFrame
    p: np.ndarray
    m: np.ndarray

    def write(self, directory: Path, meta: Dict[str, object] = None) -> Dict[str, Path]:
        directory = Path(directory)
        paths = write_dataset(self.dataset, directory)
        paths["state_totals"] = write_csv(self.state_totals, directory / "state_totals.csv", meta)
        paths["truth"] = write_json({"truth": self.truth}, directory / "truth.json", meta)
        return paths


def _coefficients(values: List[float], k: int) -> np.ndarray:
    out = np.zeros(k)
    n = min(k, len(values))
    out[:n] = values[:n]
    return out


def _lognormal(rng: np.random.Generator, mean: float, sd: float) -> float:
    v_sq = np.log1p((sd / mean) ** 2)
    return float(np.exp(np.log(mean) - 0.5 * v_sq + np.sqrt(v_sq) * rng.standard_normal()))


def simulate_synthetic(spec: SyntheticSpec) -> SyntheticData:
    """Simulate counties, deaths with suppression, county estimates and state surveys."""
    if not spec.identifiable:
        logger.warning(
            "fewer than two states carry county-level estimates; "
            "the full model (prevalence random intercept) is weakly identified"
        )
    rng = np.random.default_rng(spec.seed)
    truth_in = spec.truth
    n, n_states, k = spec.n_counties, spec.n_states, spec.n_covariates
    states = [f"S{s + 1:02d}" for s in range(n_states)]
    names = [f"x{j + 1}" for j in range(k)]

    state_index = rng.permutation(np.arange(n) % n_states)
    raw = rng.standard_normal((n, k))
    if n > 1 and k:
        x = (raw - raw.mean(axis=0)) / raw.std(axis=0, ddof=1)
    else:
        x = raw
    log_pop = rng.uniform(np.log(spec.population_min), np.log(spec.population_max), size=n)
    population = np.maximum(np.round(np.exp(log_pop)).astype(int), 1)

    beta_p = _coefficients(truth_in.beta_p, k)
    beta_m = _coefficients(truth_in.beta_m, k)
    b_p = rng.normal(0.0, truth_in.sigma0_p, n_states) if spec.prevalence_random_intercept else np.zeros(n_states)
    b_m = rng.normal(0.0, truth_in.sigma0_m, n_states) if spec.mortality_random_intercept else np.zeros(n_states)
    p = expit(truth_in.beta0_p + x @ beta_p + b_p[state_index])
    m = expit(truth_in.beta0_m + x @ beta_m + b_m[state_index])
    deaths = rng.poisson(m * p * population)
    suppressed = deaths <= spec.suppression_threshold

    counties = tuple(
        CountyRecord(
            county_id=f"C{i + 1:04d}",
            state_id=states[state_index[i]],
            population=int(population[i]),
            deaths=None if suppressed[i] else int(deaths[i]),
            suppressed=bool(suppressed[i]),
            covariates=tuple(float(v) for v in x[i]),
        )
        for i in range(n)
    )

    ratio = rng.uniform(truth_in.ratio_low, truth_in.ratio_high, n_states)
    evidence_states = sorted(rng.choice(n_states, size=spec.evidence_states, replace=False).tolist())
    shared_states = set(evidence_states[: spec.shared_sd_states])

    estimates = []
    for i in range(n):
        s = int(state_index[i])
        if s not in evidence_states:
            continue
        mean = p[i] * ratio[s]
        if s in shared_states:
            value = min(_lognormal(rng, mean, truth_in.shared_sd), _PREV_CAP)
            estimates.append(CountyPrevEstimate(
                county_id=counties[i].county_id, prev_est=value,
                sd_mode=SdMode.SHARED, sd_group=f"G{states[s]}",
            ))
        else:
            sd = spec.county_estimate_rel_sd * mean
            value = min(_lognormal(rng, mean, sd), _PREV_CAP)
            estimates.append(CountyPrevEstimate(
                county_id=counties[i].county_id, prev_est=value,
                ci_lower=value - CI_Z * sd, ci_upper=value + CI_Z * sd,
            ))

    state_pop = np.bincount(state_index, weights=population, minlength=n_states)
    state_prev = np.bincount(state_index, weights=p * population, minlength=n_states) / state_pop
    evidence = []
    for s in range(n_states):
        mean = truth_in.gamma * state_prev[s]
        sd = spec.state_estimate_rel_sd * mean
        value = min(_lognormal(rng, mean, sd), _PREV_CAP)
        half = min(CI_Z * sd, 0.999 * value, 0.999 - value)
        q_oud = int(rng.binomial(spec.survey_sample_size, ratio[s]))
        evidence.append(StateEvidence(
            state_id=states[s], prev_est=value, ci_lower=value - half, ci_upper=value + half,
            q_misuse=spec.survey_sample_size, q_oud=q_oud,
        ))

    ds = Dataset(
        counties=counties,
        state_evidence=tuple(evidence),
        county_estimates=tuple(estimates),
        covariate_names=tuple(names),
        suppression_threshold=spec.suppression_threshold,
    )

    truth: Dict[str, float] = {"beta0_p": truth_in.beta0_p, "beta0_m": truth_in.beta0_m, "gamma": truth_in.gamma}
    truth.update({f"beta_p[{c}]": float(v) for c, v in zip(names, beta_p)})
    truth.update({f"beta_m[{c}]": float(v) for c, v in zip(names, beta_m)})
    if spec.prevalence_random_intercept:
        truth["sigma0_p"] = truth_in.sigma0_p
        truth.update({f"b_p[{sid}]": float(v) for sid, v in zip(states, b_p)})
    if spec.mortality_random_intercept:
        truth["sigma0_m"] = truth_in.sigma0_m
        truth.update({f"b_m[{sid}]": float(v) for sid, v in zip(states, b_m)})
    truth.update({f"r[{sid}]": float(v) for sid, v in zip(states, ratio)})
    truth.update({f"sigma_shared[G{states[s]}]": truth_in.shared_sd for s in sorted(shared_states)})

    totals = pd.DataFrame({
        "state_id": states,
        "observed_deaths": np.bincount(state_index, weights=deaths, minlength=n_states).astype(int),
    })
    logger.info(
        "simulated %d counties in %d states, %d suppressed, %d county estimates",
        n, n_states, int(suppressed.sum()), len(estimates),
    )
    return SyntheticData(dataset=ds, truth=truth, true_deaths=deaths, state_totals=totals, p=p, m=m)
