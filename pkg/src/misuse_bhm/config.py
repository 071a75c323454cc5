"""
ABOUTME: Run-configuration management: YAML config files merged over defaults and CLI overrides
ABOUTME: Handles default output root from the environment and the configuration hash embedded in outputs
"""

import copy
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError as PydanticValidationError

from .exceptions import ConfigurationError
from .models import RunConfig


OUTPUT_ROOT_ENV = "MBHM_OUTPUT_ROOT"

DEFAULT_CONFIG: Dict[str, Any] = {
    "inputs": {
        "counties": None,
        "state_evidence": None,
        "county_prev": None,
        "state_totals": None,
        "external": None,
    },
    "prep": {
        "suppression_threshold": 9,
        "impute_missing": True,
        "covariates": None,
    },
    "model": {
        "include_prevalence_random_intercept": True,
        "include_mortality_random_intercept": True,
        "prior": {
            "intercept_sd": 10.0,
            "halfnormal_scale": 10.0,
            "random_effect_scale": None,
            "horseshoe": {"family": "half_cauchy", "scale": 1.0},
        },
        "gamma_constraint": "positive",
        "ratio_source": "evidence",
    },
    "sampler": {
        "chains": 4,
        "iterations": 50_000,
        "warmup": 25_000,
        "thin": 10,
        "target_accept": 0.8,
        "max_tree_depth": 10,
        "seed": 20150101,
        "init_jitter": 2.0,
    },
    "validate": {
        "k": 10,
        "variants": ["all"],
        "interval": "predictive",
        "level": 0.95,
    },
    "output_dir": None,
    "jobs": 1,
}

# Keys that never change numerical results.
_HASH_EXCLUDED = ("output_dir", "jobs")


def merge_configs(default: dict, user: dict) -> dict:
    """Recursively merge ``user`` over ``default``."""
    result = copy.deepcopy(default)
    for key, value in user.items():
        if key in result and isinstance(result[key], dict) and isinstance(value, dict):
            result[key] = merge_configs(result[key], value)
        else:
            result[key] = value
    return result


def default_output_root() -> Path:
    """Output root from the environment (a local ``.env`` is honoured)."""
    load_dotenv()
    return Path(os.getenv(OUTPUT_ROOT_ENV, "runs"))


def load_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Load a YAML run config, merge over defaults and apply dotted-key overrides."""
    raw: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")
        try:
            with open(config_path, "r") as f:
                raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Invalid YAML in config file {config_path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigurationError(f"Config file {config_path} must contain a mapping")

    merged = merge_configs(DEFAULT_CONFIG, raw)
    for key_path, value in (overrides or {}).items():
        if value is not None:
            set_config_value(merged, key_path, value)

    if not merged.get("output_dir"):
        merged["output_dir"] = str(default_output_root() / "default")

    try:
        return RunConfig.model_validate(merged)
    except PydanticValidationError as e:
        raise ConfigurationError(f"Invalid configuration: {e}")


def save_config(config: RunConfig, path: Path) -> None:
    """Write a resolved configuration next to run outputs."""
    try:
        with open(path, "w") as f:
            yaml.safe_dump(
                config.model_dump(mode="json", by_alias=True),
                f, default_flow_style=False, indent=2, sort_keys=False,
            )
    except OSError as e:
        raise ConfigurationError(f"Error saving config: {e}")


def get_config_value(config: Dict[str, Any], key_path: str) -> Any:
    """Get a value by dot-separated key path."""
    value: Any = config
    for key in key_path.split("."):
        if isinstance(value, dict) and key in value:
            value = value[key]
        else:
            return None
    return value


def set_config_value(config: Dict[str, Any], key_path: str, value: Any) -> None:
    """Set a value by dot-separated key path, creating parents as needed."""
    keys = key_path.split(".")
    current = config
    for key in keys[:-1]:
        if not isinstance(current.get(key), dict):
            current[key] = {}
        current = current[key]
    current[keys[-1]] = value


def config_hash(config: RunConfig) -> str:
    """SHA-256 over the result-affecting part of the configuration."""
    payload = config.model_dump(mode="json", by_alias=True, exclude=set(_HASH_EXCLUDED))
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
