"""
ABOUTME: Posterior predictive check of state-level death totals against observed unsuppressed totals
"""

import logging
from typing import Dict, Optional

import numpy as np
import pandas as pd

from ..inference import DrawSet
from ..models import Dataset
from ..predict import PosteriorRates, posterior_rates, predictive_deaths

logger = logging.getLogger(__name__)

LOWER, UPPER = 0.025, 0.975
PPC_COLUMNS = ["state_id", "observed", "pred_mean", "pred_p2.5", "pred_p50", "pred_p97.5",
               "percentile", "extreme", "skipped"]


def predictive_percentile(draws: np.ndarray, observed: float) -> float:
    """Mid-rank position of ``observed`` within predictive draws."""
    draws = np.asarray(draws, dtype=float)
    below = np.count_nonzero(draws < observed)
    ties = np.count_nonzero(draws == observed)
    return float((below + 0.5 * ties) / draws.size)


def ppc_state_deaths(drawset: DrawSet, ds: Dataset, state_totals: Dict[str, int], seed: int = 0,
                     rates: Optional[PosteriorRates] = None) -> pd.DataFrame:
    """Predictive distribution of each state's summed deaths versus its observed total."""
    rates = rates or posterior_rates(drawset, ds)
    deaths = predictive_deaths(drawset, ds, seed, rates)
    data = rates.data
    membership = np.zeros((data.n_counties, data.n_states))
    membership[np.arange(data.n_counties), data.state_index] = 1.0
    totals = deaths @ membership

    rows = []
    for s, state_id in enumerate(data.state_ids):
        draws = totals[:, s]
        lo, mid, hi = np.percentile(draws, [2.5, 50.0, 97.5])
        row = {"state_id": state_id, "pred_mean": float(draws.mean()),
               "pred_p2.5": float(lo), "pred_p50": float(mid), "pred_p97.5": float(hi)}
        if state_id not in state_totals:
            rows.append({**row, "observed": np.nan, "percentile": np.nan, "extreme": False, "skipped": True})
            continue
        observed = float(state_totals[state_id])
        q = predictive_percentile(draws, observed)
        rows.append({**row, "observed": observed, "percentile": q,
                     "extreme": bool(q < LOWER or q > UPPER), "skipped": False})
    frame = pd.DataFrame(rows, columns=PPC_COLUMNS)
    skipped = int(frame["skipped"].sum())
    if skipped:
        logger.warning("%d states without observed totals skipped in predictive check", skipped)
    return frame
