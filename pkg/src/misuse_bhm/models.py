"""
ABOUTME: Pydantic data models for input records, run configuration, and validation reports
ABOUTME: Provides type-safe representations of counties, evidence tables, prior specs, and sampler settings
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Input records


class CountyRecord(BaseModel):
    """One county: population, possibly suppressed deaths, raw covariates."""
    model_config = ConfigDict(frozen=True)

    county_id: str
    state_id: str
    population: int = Field(..., ge=1)
    deaths: Optional[int] = Field(None, ge=0)
    suppressed: bool = False
    covariates: Tuple[Optional[float], ...] = ()

    @model_validator(mode="after")
    def check_suppression(self) -> "CountyRecord":
        if self.suppressed != (self.deaths is None):
            raise ValueError("suppressed must be true exactly when deaths is blank")
        return self


class StateEvidence(BaseModel):
    """Survey prevalence estimate for one state plus OUD / misuse head counts."""
    model_config = ConfigDict(frozen=True)

    state_id: str
    prev_est: float = Field(..., gt=0.0, lt=1.0)
    ci_lower: float = Field(..., gt=0.0, lt=1.0)
    ci_upper: float = Field(..., gt=0.0, lt=1.0)
    q_misuse: int = Field(..., ge=1)
    q_oud: int = Field(..., ge=0)

    @model_validator(mode="after")
    def check_bounds(self) -> "StateEvidence":
        if not (self.ci_lower <= self.prev_est <= self.ci_upper):
            raise ValueError("require ci_lower <= prev_est <= ci_upper")
        if self.q_oud > self.q_misuse:
            raise ValueError("q_oud cannot exceed q_misuse")
        return self


class SdMode(str, Enum):
    FROM_CI = "from_ci"
    SHARED = "shared"


class CountyPrevEstimate(BaseModel):
    """Published county OUD prevalence estimate."""
    model_config = ConfigDict(frozen=True)

    county_id: str
    prev_est: float = Field(..., gt=0.0, lt=1.0)
    ci_lower: Optional[float] = None
    ci_upper: Optional[float] = None
    sd_mode: SdMode = SdMode.FROM_CI
    sd_group: Optional[str] = None

    @model_validator(mode="after")
    def check_sd_mode(self) -> "CountyPrevEstimate":
        if self.sd_mode == SdMode.FROM_CI:
            if self.ci_lower is None or self.ci_upper is None:
                raise ValueError("sd_mode=from_ci requires both CI bounds")
            if not (self.ci_lower <= self.prev_est <= self.ci_upper):
                raise ValueError("require ci_lower <= prev_est <= ci_upper")
        elif not self.sd_group:
            raise ValueError("sd_mode=shared requires sd_group")
        return self


class Dataset(BaseModel):
    """All input tables after ingestion; immutable once prepared."""
    model_config = ConfigDict(frozen=True)

    counties: Tuple[CountyRecord, ...]
    state_evidence: Tuple[StateEvidence, ...] = ()
    county_estimates: Tuple[CountyPrevEstimate, ...] = ()
    covariate_names: Tuple[str, ...] = ()
    standardization: Dict[str, Tuple[float, float]] = Field(default_factory=dict)
    suppression_threshold: int = Field(9, ge=0)
    imputed_count: int = 0

    @property
    def state_ids(self) -> List[str]:
        """States in order of first appearance among counties."""
        return list(dict.fromkeys(c.state_id for c in self.counties))

    @property
    def county_ids(self) -> List[str]:
        return [c.county_id for c in self.counties]

    @property
    def shared_sd_groups(self) -> List[str]:
        return list(dict.fromkeys(
            e.sd_group for e in self.county_estimates if e.sd_mode == SdMode.SHARED
        ))

    def covariate_matrix(self) -> np.ndarray:
        """Counties x covariates, NaN where missing."""
        if not self.counties:
            return np.zeros((0, len(self.covariate_names)))
        return np.array(
            [[np.nan if v is None else v for v in c.covariates] for c in self.counties],
            dtype=float,
        ).reshape(len(self.counties), len(self.covariate_names))


# Configuration


class PrepConfig(BaseModel):
    """Data-preparation settings."""
    suppression_threshold: int = Field(9, ge=0)
    impute_missing: bool = True
    covariates: Optional[List[str]] = None


class HorseshoeFamily(str, Enum):
    HALF_CAUCHY = "half_cauchy"
    HALF_NORMAL = "half_normal"


class HorseshoeSpec(BaseModel):
    family: HorseshoeFamily = HorseshoeFamily.HALF_CAUCHY
    scale: float = Field(1.0, gt=0.0)


class PriorSpec(BaseModel):
    """Prior scales; defaults are the weakly informative base case."""
    intercept_sd: float = Field(10.0, gt=0.0)
    halfnormal_scale: float = Field(10.0, gt=0.0)
    random_effect_scale: Optional[float] = Field(None, gt=0.0)
    horseshoe: HorseshoeSpec = Field(default_factory=HorseshoeSpec)

    @property
    def re_scale(self) -> float:
        return self.random_effect_scale or self.halfnormal_scale


class GammaConstraint(str, Enum):
    POSITIVE_UNBOUNDED = "positive"
    UNIT_INTERVAL = "unit_interval"


class RatioSource(str, Enum):
    # r_s for states with county estimates or survey head counts
    EVIDENCE = "evidence"
    # r_s only for states with county estimates; other binomial terms dropped
    COUNTY_ESTIMATES = "county_estimates"


class DerivedToggles(BaseModel):
    inverse_gamma: bool = True
    baseline_prevalence: bool = True
    baseline_mortality: bool = True


class ModelConfig(BaseModel):
    """Model structure and prior choices."""
    include_prevalence_random_intercept: bool = True
    include_mortality_random_intercept: bool = True
    prior: PriorSpec = Field(default_factory=PriorSpec)
    gamma_constraint: GammaConstraint = GammaConstraint.POSITIVE_UNBOUNDED
    ratio_source: RatioSource = RatioSource.EVIDENCE
    prevalence_covariates: Optional[List[str]] = None
    mortality_covariates: Optional[List[str]] = None
    min_sd: float = Field(1e-8, gt=0.0)
    derived: DerivedToggles = Field(default_factory=DerivedToggles)

    def reduced(self) -> "ModelConfig":
        """Same configuration without the prevalence random intercept."""
        return self.model_copy(update={"include_prevalence_random_intercept": False})


class SamplerConfig(BaseModel):
    """NUTS run protocol; defaults reproduce 4 x 50,000 / 25,000 / thin 10."""
    chains: int = Field(4, ge=1)
    iterations: int = Field(50_000, ge=1)
    warmup: int = Field(25_000, ge=0)
    thin: int = Field(10, ge=1)
    target_accept: float = Field(0.8, gt=0.0, lt=1.0)
    max_tree_depth: int = Field(10, ge=1)
    seed: int = Field(20150101, ge=0, lt=2**64)
    init_jitter: float = Field(2.0, gt=0.0)
    init_attempts: int = Field(100, ge=1)
    divergence_threshold: float = Field(1000.0, gt=0.0)

    @model_validator(mode="after")
    def check_warmup(self) -> "SamplerConfig":
        if self.warmup > self.iterations:
            raise ValueError("warmup cannot exceed iterations")
        return self

    @property
    def retained_per_chain(self) -> int:
        # trailing remainder is dropped
        return (self.iterations - self.warmup) // self.thin


class TrueParameters(BaseModel):
    """Ground truth for synthetic data; defaults follow the published fit."""
    beta0_p: float = -2.90
    beta_p: List[float] = Field(default_factory=lambda: [0.16, 0.08, 0.05, 0.13, 0.01])
    sigma0_p: float = Field(0.21, gt=0.0)
    beta0_m: float = -6.01
    beta_m: List[float] = Field(default_factory=lambda: [0.06, 0.15, 0.04, -0.16, 0.00])
    sigma0_m: float = Field(0.48, gt=0.0)
    gamma: float = Field(0.21, gt=0.0)
    ratio_low: float = Field(0.6, gt=0.0, lt=1.0)
    ratio_high: float = Field(0.95, gt=0.0, lt=1.0)
    shared_sd: float = Field(0.02, gt=0.0)


class SyntheticSpec(BaseModel):
    """Forward-simulation design for recovery and calibration studies."""
    n_counties: int = Field(300, ge=2)
    n_states: int = Field(15, ge=1)
    n_covariates: int = Field(5, ge=0)
    evidence_states: int = Field(2, ge=0)
    shared_sd_states: int = Field(1, ge=0)
    population_min: int = Field(5_000, ge=1)
    population_max: int = Field(1_000_000, ge=1)
    suppression_threshold: int = Field(9, ge=0)
    county_estimate_rel_sd: float = Field(0.15, gt=0.0)
    state_estimate_rel_sd: float = Field(0.10, gt=0.0)
    survey_sample_size: int = Field(400, ge=1)
    prevalence_random_intercept: bool = True
    mortality_random_intercept: bool = True
    target_full_model: bool = True
    truth: TrueParameters = Field(default_factory=TrueParameters)
    seed: int = Field(1, ge=0)

    @model_validator(mode="after")
    def check_design(self) -> "SyntheticSpec":
        if self.evidence_states > self.n_states:
            raise ValueError("evidence_states cannot exceed n_states")
        if self.shared_sd_states > self.evidence_states:
            raise ValueError("shared_sd_states cannot exceed evidence_states")
        if self.population_max < self.population_min:
            raise ValueError("population_max must be >= population_min")
        if self.n_states > self.n_counties:
            raise ValueError("every state needs at least one county")
        return self

    @property
    def identifiable(self) -> bool:
        return not self.target_full_model or self.evidence_states >= 2


class InputPaths(BaseModel):
    counties: Optional[str] = None
    state_evidence: Optional[str] = None
    county_prev: Optional[str] = None
    state_totals: Optional[str] = None
    external: Optional[str] = None


class ValidateOptions(BaseModel):
    k: int = Field(10, ge=2)
    variants: List[str] = Field(default_factory=lambda: ["all"])
    interval: str = Field("predictive", pattern="^(predictive|expected)$")
    level: float = Field(0.95, gt=0.0, lt=1.0)


class RunConfig(BaseModel):
    """Fully resolved configuration of one command invocation."""
    inputs: InputPaths = Field(default_factory=InputPaths)
    prep: PrepConfig = Field(default_factory=PrepConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    sampler: SamplerConfig = Field(default_factory=SamplerConfig)
    synthetic: SyntheticSpec = Field(default_factory=SyntheticSpec)
    validate_options: ValidateOptions = Field(default_factory=ValidateOptions, alias="validate")
    output_dir: str = "runs/default"
    jobs: int = Field(1, ge=1)

    model_config = ConfigDict(populate_by_name=True)


# Validation reports


class CvUnit(BaseModel):
    """One held-out observation."""
    unit_id: str
    state_id: str
    fold: int
    observed: Optional[float]
    predicted_mean: float
    lower: float
    upper: float
    covered: Optional[bool] = None
    suppressed: bool = False
    p_below_threshold: Optional[float] = None


class FoldResult(BaseModel):
    fold: int
    n_units: int
    max_rhat: float
    converged: bool


class CvReport(BaseModel):
    """Held-out comparison for one cross-validation design."""
    kind: str
    folds: List[FoldResult] = Field(default_factory=list)
    units: List[CvUnit] = Field(default_factory=list)
    mape: Optional[float] = None
    coverage: Optional[float] = None
    rank_correlation: Optional[float] = None
    linear_correlation: Optional[float] = None
    extra: Dict[str, float] = Field(default_factory=dict)

    @field_validator("coverage")
    @classmethod
    def check_coverage(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("coverage must lie in [0, 1]")
        return v
