# ABOUTME: Simulate command: write a complete synthetic input set plus its ground-truth parameters

from pathlib import Path
from typing import Any, Dict, Optional

from ..models import RunConfig
from ..validate import simulate_synthetic
from .paths import RunPaths, run_meta


def simulate_data(cfg: RunConfig, directory: Optional[Path] = None) -> Dict[str, Any]:
    """
    Simulate a dataset from ``cfg.synthetic``.

    Args:
        cfg: Resolved run configuration
        directory: Target directory (defaults to ``<out>/synthetic``)

    Returns:
        Simulation summary and the paths written
    """
    directory = Path(directory) if directory else RunPaths.of(cfg).root / "synthetic"
    synthetic = simulate_synthetic(cfg.synthetic)
    paths = synthetic.write(directory, {**run_meta(cfg), "seed": cfg.synthetic.seed})
    ds = synthetic.dataset
    return {
        "counties": len(ds.counties),
        "states": len(ds.state_ids),
        "suppressed": sum(1 for c in ds.counties if c.suppressed),
        "county_estimates": len(ds.county_estimates),
        "identifiable": cfg.synthetic.identifiable,
        "paths": {k: str(v) for k, v in paths.items()},
    }
