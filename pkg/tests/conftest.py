"""
ABOUTME: Shared pytest fixtures: a small synthetic dataset, a short sampler protocol and a fitted draw set
"""

from pathlib import Path

import pytest

from misuse_bhm.inference import fit
from misuse_bhm.models import ModelConfig, SamplerConfig, SyntheticSpec
from misuse_bhm.validate import simulate_synthetic


@pytest.fixture
def write_csv_text(tmp_path):
    """Write literal CSV text into the test directory."""
    def write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path
    return write


@pytest.fixture(scope="session")
def synthetic():
    spec = SyntheticSpec(
        n_counties=40,
        n_states=4,
        n_covariates=2,
        evidence_states=2,
        shared_sd_states=1,
        population_min=20_000,
        population_max=400_000,
        seed=7,
    )
    return simulate_synthetic(spec)


@pytest.fixture(scope="session")
def small_ds(synthetic):
    return synthetic.dataset


@pytest.fixture
def tiny_sampler():
    return SamplerConfig(chains=2, iterations=40, warmup=20, thin=1, max_tree_depth=6, seed=5)


@pytest.fixture(scope="session")
def fitted(small_ds):
    scfg = SamplerConfig(chains=2, iterations=60, warmup=30, thin=1, max_tree_depth=6, seed=11)
    return fit(small_ds, ModelConfig(), scfg)


@pytest.fixture
def raw_inputs(tmp_path, synthetic):
    """Synthetic inputs written as CSV files, as a user would supply them."""
    paths = synthetic.write(tmp_path / "inputs")
    return {name: str(path) for name, path in paths.items()}
