"""
ABOUTME: Immutable array view of a prepared Dataset consumed by the log-density
ABOUTME: Resolves covariate blocks, state indices, OUD-ratio slots, shared-SD groups and hold-out masks
"""

from dataclasses import dataclass
from typing import Iterable, List, Optional

import numpy as np

from ..data import sd_from_ci
from ..exceptions import ModelConfigurationError
from ..models import Dataset, ModelConfig, RatioSource, SdMode


@dataclass(frozen=True)
class ModelData:
    """Numerical arrays for one (dataset, model config, hold-out) combination.

    Hold-out masks remove likelihood terms only; the parameter layout is
    derived from the full dataset and is identical across masks.
    """

    county_ids: List[str]
    state_ids: List[str]
    state_index: np.ndarray
    population: np.ndarray
    log_population: np.ndarray
    state_population: np.ndarray
    deaths: np.ndarray
    suppressed: np.ndarray
    death_mask: np.ndarray
    threshold: int

    prevalence_names: List[str]
    mortality_names: List[str]
    x_p: np.ndarray
    x_m: np.ndarray

    est_county: np.ndarray
    est_state: np.ndarray
    est_y: np.ndarray
    est_sd: np.ndarray
    est_group: np.ndarray
    est_mask: np.ndarray
    group_names: List[str]

    ev_state: np.ndarray
    ev_y: np.ndarray
    ev_sd: np.ndarray
    ev_q_misuse: np.ndarray
    ev_q_oud: np.ndarray

    ratio_states: List[int]
    ratio_slot: np.ndarray
    min_sd: float

    @property
    def n_counties(self) -> int:
        return len(self.county_ids)

    @property
    def n_states(self) -> int:
        return len(self.state_ids)

    @property
    def ev_slot(self) -> np.ndarray:
        return self.ratio_slot[self.ev_state] if self.ev_state.size else self.ev_state

    @classmethod
    def build(
        cls,
        ds: Dataset,
        cfg: Optional[ModelConfig] = None,
        holdout_deaths: Iterable[str] = (),
        holdout_estimates: Iterable[str] = (),
    ) -> "ModelData":
        cfg = cfg or ModelConfig()
        county_ids = ds.county_ids
        state_ids = ds.state_ids
        county_pos = {cid: i for i, cid in enumerate(county_ids)}
        state_pos = {sid: s for s, sid in enumerate(state_ids)}
        n, n_states = len(county_ids), len(state_ids)

        state_index = np.array([state_pos[c.state_id] for c in ds.counties], dtype=int)
        population = np.array([c.population for c in ds.counties], dtype=float)
        deaths = np.array([0 if c.deaths is None else c.deaths for c in ds.counties], dtype=float)
        suppressed = np.array([c.suppressed for c in ds.counties], dtype=bool)

        held_deaths = set(holdout_deaths)
        death_mask = np.array([cid not in held_deaths for cid in county_ids], dtype=bool)

        matrix = ds.covariate_matrix()
        if np.isnan(matrix).any():
            raise ModelConfigurationError("covariates contain missing values; prepare the dataset first")
        p_names = _select(ds, cfg.prevalence_covariates, "prevalence")
        m_names = _select(ds, cfg.mortality_covariates, "mortality")
        columns = {name: j for j, name in enumerate(ds.covariate_names)}
        x_p = matrix[:, [columns[c] for c in p_names]].reshape(n, len(p_names))
        x_m = matrix[:, [columns[c] for c in m_names]].reshape(n, len(m_names))

        groups = ds.shared_sd_groups
        group_pos = {g: k for k, g in enumerate(groups)}
        held_est = set(holdout_estimates)
        est_county = np.array([county_pos[e.county_id] for e in ds.county_estimates], dtype=int)
        est_y = np.array([e.prev_est for e in ds.county_estimates], dtype=float)
        est_sd = np.array([
            sd_from_ci(e.ci_lower, e.ci_upper) if e.sd_mode == SdMode.FROM_CI else np.nan
            for e in ds.county_estimates
        ], dtype=float)
        est_group = np.array([
            group_pos[e.sd_group] if e.sd_mode == SdMode.SHARED else -1
            for e in ds.county_estimates
        ], dtype=int)
        est_mask = np.array([e.county_id not in held_est for e in ds.county_estimates], dtype=bool)
        est_state = state_index[est_county] if est_county.size else np.zeros(0, dtype=int)

        ev_state = np.array([state_pos[e.state_id] for e in ds.state_evidence], dtype=int)
        ev_y = np.array([e.prev_est for e in ds.state_evidence], dtype=float)
        ev_sd = np.array([sd_from_ci(e.ci_lower, e.ci_upper) for e in ds.state_evidence], dtype=float)
        ev_q_misuse = np.array([e.q_misuse for e in ds.state_evidence], dtype=float)
        ev_q_oud = np.array([e.q_oud for e in ds.state_evidence], dtype=float)

        with_ratio = set(est_state.tolist())
        if cfg.ratio_source == RatioSource.EVIDENCE:
            with_ratio |= set(ev_state.tolist())
        ratio_states = [s for s in range(n_states) if s in with_ratio]
        ratio_slot = np.full(n_states, -1, dtype=int)
        ratio_slot[ratio_states] = np.arange(len(ratio_states))
        if est_state.size and (ratio_slot[est_state] < 0).any():
            raise ModelConfigurationError("county estimate in a state without an OUD ratio parameter")

        return cls(
            county_ids=county_ids,
            state_ids=state_ids,
            state_index=state_index,
            population=population,
            log_population=np.log(population),
            state_population=np.bincount(state_index, weights=population, minlength=n_states),
            deaths=deaths,
            suppressed=suppressed,
            death_mask=death_mask,
            threshold=ds.suppression_threshold,
            prevalence_names=p_names,
            mortality_names=m_names,
            x_p=x_p,
            x_m=x_m,
            est_county=est_county,
            est_state=est_state,
            est_y=est_y,
            est_sd=est_sd,
            est_group=est_group,
            est_mask=est_mask,
            group_names=groups,
            ev_state=ev_state,
            ev_y=ev_y,
            ev_sd=ev_sd,
            ev_q_misuse=ev_q_misuse,
            ev_q_oud=ev_q_oud,
            ratio_states=ratio_states,
            ratio_slot=ratio_slot,
            min_sd=cfg.min_sd,
        )


def _select(ds: Dataset, names: Optional[List[str]], block: str) -> List[str]:
    if names is None:
        return list(ds.covariate_names)
    unknown = [c for c in names if c not in ds.covariate_names]
    if unknown:
        raise ModelConfigurationError(f"{block} covariates {unknown} are not in the dataset")
    return list(names)
