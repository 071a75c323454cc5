"""
ABOUTME: Prepare command: load raw input tables, impute and standardize, persist the prepared dataset
ABOUTME: Later commands reload the prepared copy so every stage sees identical inputs
"""

import logging
from pathlib import Path
from typing import Any, Dict

from ..data import dataset_hash, load_dataset, load_prepared, prepare_dataset, write_dataset
from ..exceptions import ConfigurationError
from ..models import Dataset, RunConfig
from .paths import RunPaths, run_meta

logger = logging.getLogger(__name__)


def _optional(path: str) -> Path:
    return Path(path) if path else None


def prepare_data(cfg: RunConfig) -> Dict[str, Any]:
    """
    Load, validate and prepare the configured input tables.

    Args:
        cfg: Resolved run configuration; ``inputs.counties`` is required

    Returns:
        Summary of the prepared dataset and the paths written
    """
    if not cfg.inputs.counties:
        raise ConfigurationError("inputs.counties is not set; pass a config file with an inputs section")
    raw = load_dataset(
        Path(cfg.inputs.counties),
        _optional(cfg.inputs.state_evidence),
        _optional(cfg.inputs.county_prev),
        cfg.prep,
    )
    ds = prepare_dataset(raw, cfg.prep)
    paths = write_dataset(ds, RunPaths.of(cfg).data, run_meta(cfg))
    return {
        "counties": len(ds.counties),
        "states": len(ds.state_ids),
        "suppressed": sum(1 for c in ds.counties if c.suppressed),
        "county_estimates": len(ds.county_estimates),
        "state_evidence": len(ds.state_evidence),
        "covariates": list(ds.covariate_names),
        "imputed_count": ds.imputed_count,
        "dataset_hash": dataset_hash(ds),
        "paths": {k: str(v) for k, v in paths.items()},
    }


def run_dataset(cfg: RunConfig) -> Dataset:
    """The run's prepared dataset, preparing it first when absent."""
    directory = RunPaths.of(cfg).data
    if not (directory / "dataset.json").exists():
        logger.info("no prepared dataset in %s; preparing from inputs", directory)
        prepare_data(cfg)
    return load_prepared(directory)
