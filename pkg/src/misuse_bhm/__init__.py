"""
ABOUTME: misuse-bhm - Python package initialization
ABOUTME: Bayesian multi-state integration of overdose deaths and prevalence estimates for county-level opioid misuse

Joint model of censored county overdose-death counts, published county OUD prevalence
estimates and state survey prevalence, fitted with a built-in No-U-Turn sampler.
"""

__version__ = "0.1.0"

from .config import load_config, save_config
from .data import load_dataset, prepare_dataset
from .inference import DrawSet, fit, summarize
from .models import Dataset, ModelConfig, RunConfig, SamplerConfig

__all__ = [
    "__version__",
    "Dataset",
    "DrawSet",
    "ModelConfig",
    "RunConfig",
    "SamplerConfig",
    "fit",
    "load_config",
    "load_dataset",
    "prepare_dataset",
    "save_config",
    "summarize",
]
