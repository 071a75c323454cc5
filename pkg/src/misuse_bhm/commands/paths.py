# ABOUTME: Run-directory layout shared by all commands
# ABOUTME: Every artifact of a run lives under one output directory with fixed file names

from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict

from ..config import config_hash
from ..models import RunConfig


@dataclass(frozen=True)
class RunPaths:
    root: Path

    @classmethod
    def of(cls, cfg: RunConfig) -> "RunPaths":
        return cls(Path(cfg.output_dir))

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def draws(self) -> Path:
        return self.root / "draws"

    @property
    def validate(self) -> Path:
        return self.root / "validate"

    @property
    def config(self) -> Path:
        return self.root / "config.yaml"

    @property
    def summary(self) -> Path:
        return self.root / "summary.csv"

    @property
    def convergence(self) -> Path:
        return self.root / "convergence.json"

    @property
    def predictions(self) -> Path:
        return self.root / "predictions.csv"

    @property
    def aggregates(self) -> Path:
        return self.root / "aggregates.csv"

    @property
    def suppression(self) -> Path:
        return self.root / "suppression.json"

    @property
    def report(self) -> Path:
        return self.root / "report.md"


def run_meta(cfg: RunConfig) -> Dict[str, Any]:
    """Header stamped into every artifact."""
    return {"config_hash": config_hash(cfg), "seed": cfg.sampler.seed}
