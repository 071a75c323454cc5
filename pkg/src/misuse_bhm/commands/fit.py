"""
ABOUTME: Fit command: run the sampler on the prepared dataset and write draws, summary and convergence report
ABOUTME: Also provides the stale-draws guard used by every command that reads stored draws
"""

from typing import Any, Dict, Optional

from ..config import config_hash, save_config
from ..data import dataset_hash
from ..exceptions import StaleDrawsError
from ..inference import DrawSet, fit, summarize
from ..models import Dataset, RunConfig
from ..utils.files import write_csv, write_json
from .paths import RunPaths, run_meta
from .prepare import run_dataset


def fit_model(cfg: RunConfig, draws_format: str = "csv") -> Dict[str, Any]:
    """
    Fit the model and persist the run.

    Args:
        cfg: Resolved run configuration
        draws_format: ``csv`` (one file per chain) or ``npz``

    Returns:
        The convergence report plus the paths written
    """
    paths = RunPaths.of(cfg)
    ds = run_dataset(cfg)
    drawset = fit(ds, cfg.model, cfg.sampler, jobs=cfg.jobs, config_hash=config_hash(cfg))
    meta = run_meta(cfg)

    paths.root.mkdir(parents=True, exist_ok=True)
    save_config(cfg, paths.config)
    drawset.save(paths.draws, draws_format)
    summary = summarize(drawset)
    write_csv(summary, paths.summary, meta)
    report = drawset.metadata["convergence"]
    write_json({"convergence": report}, paths.convergence, meta)
    return {
        **report,
        "retained_draws": drawset.n_total,
        "paths": {
            "draws": str(paths.draws),
            "summary": str(paths.summary),
            "convergence": str(paths.convergence),
        },
    }


def check_fresh(drawset: DrawSet, ds: Dataset, cfg: RunConfig) -> None:
    """Refuse draws fitted to a different dataset or model configuration."""
    stored = drawset.metadata.get("dataset_hash")
    if stored != dataset_hash(ds):
        raise StaleDrawsError(f"draws were fitted to dataset {stored}, current dataset is {dataset_hash(ds)}")
    if drawset.metadata.get("model") != cfg.model.model_dump(mode="json"):
        raise StaleDrawsError("draws were fitted with a different model configuration; re-run fit")


def load_run(cfg: RunConfig, ds: Optional[Dataset] = None) -> DrawSet:
    """Stored draws of the run, checked against the current dataset and model."""
    ds = ds or run_dataset(cfg)
    drawset = DrawSet.load(RunPaths.of(cfg).draws)
    check_fresh(drawset, ds, cfg)
    return drawset
