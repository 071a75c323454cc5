"""
ABOUTME: Agreement between county predictions and an externally published set of estimates
"""

from typing import Any, Dict, Optional

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import ValidationError


def _corr(fn, x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if x.size < 2 or np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    return float(fn(x, y)[0])


def compare_external(predictions: pd.DataFrame, external: pd.DataFrame) -> Dict[str, Any]:
    """Correlations plus point-in-CrI and interval-overlap counts on matched counties."""
    merged = predictions.merge(external, on="county_id", how="inner")
    if merged.empty:
        raise ValidationError("no counties in common with the external estimates")
    model = merged["prev_mean"].to_numpy(dtype=float)
    other = merged["estimate"].to_numpy(dtype=float)
    lo = merged["prev_p2.5"].to_numpy(dtype=float)
    hi = merged["prev_p97.5"].to_numpy(dtype=float)

    has_ci = merged["ci_lower"].notna() & merged["ci_upper"].notna()
    ext_lo = merged.loc[has_ci, "ci_lower"].to_numpy(dtype=float)
    ext_hi = merged.loc[has_ci, "ci_upper"].to_numpy(dtype=float)
    overlap = (ext_lo <= hi[has_ci.to_numpy()]) & (lo[has_ci.to_numpy()] <= ext_hi)

    return {
        "n_matched": int(len(merged)),
        "n_unmatched": int(len(external) - len(merged)),
        "rank_correlation": _corr(stats.spearmanr, model, other),
        "linear_correlation": _corr(stats.pearsonr, model, other),
        "point_in_interval": int(np.sum((lo <= other) & (other <= hi))),
        "n_with_interval": int(has_ci.sum()),
        "interval_overlap": int(overlap.sum()),
        "mean_model": float(model.mean()),
        "mean_external": float(other.mean()),
    }
