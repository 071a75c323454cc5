"""
ABOUTME: Prior sensitivity sweeps: alternative prior specifications fitted side by side
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np
import pandas as pd

from ..exceptions import ValidationError
from ..inference import DrawSet, fit
from ..models import Dataset, HorseshoeFamily, HorseshoeSpec, ModelConfig, SamplerConfig

logger = logging.getLogger(__name__)


def _with_prior(base: ModelConfig, **changes) -> ModelConfig:
    return base.model_copy(update={"prior": base.prior.model_copy(update=changes)})


def stronger_prior_variants(base: ModelConfig) -> Dict[str, ModelConfig]:
    """The base configuration plus six stronger-prior alternatives."""
    half_normal = HorseshoeSpec(family=HorseshoeFamily.HALF_NORMAL, scale=0.5)
    return {
        "base": base,
        "intercept_sd_5": _with_prior(base, intercept_sd=5.0),
        "intercept_sd_2.5": _with_prior(base, intercept_sd=2.5),
        "re_scale_5": _with_prior(base, random_effect_scale=5.0),
        "re_scale_2.5": _with_prior(base, random_effect_scale=2.5),
        "horseshoe_half_normal_0.5": _with_prior(base, horseshoe=half_normal),
        "combined": _with_prior(base, intercept_sd=2.5, random_effect_scale=2.5, horseshoe=half_normal),
    }


def select_variants(base: ModelConfig, names: List[str]) -> Dict[str, ModelConfig]:
    """Resolve variant names; ``all`` expands to the full set."""
    available = stronger_prior_variants(base)
    if not names or "all" in names:
        return available
    unknown = [n for n in names if n not in available]
    if unknown:
        raise ValidationError(f"unknown prior variants: {', '.join(unknown)}")
    selected = {"base": base}
    selected.update({n: available[n] for n in names})
    return selected


@dataclass
class SensitivityReport:
    table: pd.DataFrame
    converged: Dict[str, bool] = field(default_factory=dict)
    max_rhat: Dict[str, float] = field(default_factory=dict)

    @property
    def max_shift(self) -> float:
        if self.table.empty:
            return 0.0
        return float(self.table["max_shift_sd"].max())


def compare_variants(fits: Mapping[str, DrawSet]) -> pd.DataFrame:
    """Posterior mean and 95% CrI per parameter and variant, with the largest pairwise mean shift.

    Shifts are in units of the pooled posterior sd across variants.
    """
    if not fits:
        return pd.DataFrame()
    labels = list(fits)
    names = [n for n in fits[labels[0]].names if all(n in d.names for d in fits.values())]
    rows = []
    for name in names:
        row = {"param": name}
        means, variances = [], []
        for label in labels:
            values = fits[label].pooled()[:, fits[label].index(name)]
            lo, hi = np.percentile(values, [2.5, 97.5])
            row[f"{label}_mean"] = float(values.mean())
            row[f"{label}_p2.5"] = float(lo)
            row[f"{label}_p97.5"] = float(hi)
            means.append(values.mean())
            variances.append(values.var(ddof=1) if values.size > 1 else 0.0)
        pooled_sd = float(np.sqrt(np.mean(variances)))
        shift = max((abs(a - b) for a, b in itertools.combinations(means, 2)), default=0.0)
        row["max_shift_sd"] = float(shift / pooled_sd) if pooled_sd > 0 else 0.0
        rows.append(row)
    return pd.DataFrame(rows)


def prior_sensitivity(
    ds: Dataset,
    base: ModelConfig,
    scfg: SamplerConfig,
    variants: Optional[Mapping[str, ModelConfig]] = None,
    *,
    jobs: int = 1,
) -> SensitivityReport:
    """Fit every variant with the same sampler settings and compare posteriors."""
    variants = dict(variants) if variants is not None else stronger_prior_variants(base)
    fits: Dict[str, DrawSet] = {}
    converged: Dict[str, bool] = {}
    max_rhat: Dict[str, float] = {}
    for label, mcfg in variants.items():
        logger.info("prior sensitivity: fitting variant %s", label)
        drawset = fit(ds, mcfg, scfg, jobs=jobs)
        report = drawset.metadata["convergence"]
        converged[label] = bool(report["passed"])
        max_rhat[label] = float(report["max_rhat"])
        if not converged[label]:
            logger.warning("prior variant %s did not converge (max R-hat %s)", label, report["max_rhat"])
        fits[label] = drawset
    return SensitivityReport(table=compare_variants(fits), converged=converged, max_rhat=max_rhat)
