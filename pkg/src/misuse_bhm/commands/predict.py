"""
ABOUTME: Predict command: county prediction table, state/national aggregates and suppression summary
"""

from typing import Any, Dict, Optional

from ..models import RunConfig
from ..predict import national_and_state_aggregates, posterior_rates, prediction_table, suppression_summary
from ..utils.files import write_csv, write_json
from .fit import load_run
from .paths import RunPaths, run_meta
from .prepare import run_dataset


def predict_run(cfg: RunConfig, seed: Optional[int] = None) -> Dict[str, Any]:
    """
    Write predictions.csv, aggregates.csv and suppression.json for a fitted run.

    Args:
        cfg: Resolved run configuration
        seed: Seed for predictive death draws (defaults to the sampler seed)

    Returns:
        National prevalence summary, suppression summary and paths written
    """
    paths = RunPaths.of(cfg)
    ds = run_dataset(cfg)
    drawset = load_run(cfg, ds)
    rates = posterior_rates(drawset, ds, cfg.model)
    seed = cfg.sampler.seed if seed is None else seed
    meta = run_meta(cfg)

    predictions = prediction_table(drawset, ds, seed, rates)
    aggregates = national_and_state_aggregates(drawset, ds, rates)
    suppression = suppression_summary(predictions, ds)
    write_csv(predictions, paths.predictions, meta)
    write_csv(aggregates, paths.aggregates, meta)
    write_json({"suppression": suppression}, paths.suppression, meta)

    national = aggregates[aggregates["level"] == "national"].iloc[0]
    return {
        "national_prevalence": float(national["prev_mean"]),
        "national_prevalence_p2.5": float(national["prev_p2.5"]),
        "national_prevalence_p97.5": float(national["prev_p97.5"]),
        "national_count": float(national["count_mean"]),
        **{f"suppression_{k}": v for k, v in suppression.items()},
        "paths": {
            "predictions": str(paths.predictions),
            "aggregates": str(paths.aggregates),
            "suppression": str(paths.suppression),
        },
    }
