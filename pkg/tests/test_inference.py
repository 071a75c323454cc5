"""
ABOUTME: Tests for convergence diagnostics, posterior summaries, draw-set persistence and the fit driver
"""

import numpy as np
import pandas as pd
import pytest

from misuse_bhm.exceptions import ValidationError
from misuse_bhm.inference import (
    MIN_GATE_DRAWS,
    SUMMARY_COLUMNS,
    DrawSet,
    convergence_report,
    ess,
    rhat,
    summarize,
)
from misuse_bhm.model import ModelData, ParameterLayout
from misuse_bhm.models import ModelConfig


def _ar1(rng, n, phi):
    x = np.empty(n)
    x[0] = rng.standard_normal()
    for t in range(1, n):
        x[t] = phi * x[t - 1] + np.sqrt(1 - phi ** 2) * rng.standard_normal()
    return x


def test_rhat_near_one_for_mixed_chains():
    chains = np.random.default_rng(0).standard_normal((4, 1000))
    r = rhat(chains)
    assert not r.degenerate
    assert r.value < 1.01


def test_rhat_flags_separated_chains():
    rng = np.random.default_rng(1)
    chains = rng.standard_normal((4, 500)) + np.array([[0.0], [0.0], [5.0], [5.0]])
    assert rhat(chains).value > 1.5


def test_single_chain_rhat_uses_split_halves():
    rng = np.random.default_rng(2)
    drifting = np.concatenate([rng.standard_normal(200), rng.standard_normal(200) + 4.0])
    assert rhat(drifting).value > 1.5


def test_constant_chains_are_degenerate():
    chains = np.full((2, 50), 3.0)
    assert rhat(chains) == (1.0, True)
    assert ess(chains).degenerate


def test_too_few_draws():
    with pytest.raises(ValidationError):
        rhat(np.zeros((2, 3)))


def test_ess_of_independent_draws_is_close_to_the_draw_count():
    chains = np.random.default_rng(3).standard_normal((4, 1000))
    value = ess(chains).value
    assert 0.7 * 4000 < value < 1.3 * 4000


def test_ess_shrinks_under_autocorrelation():
    rng = np.random.default_rng(4)
    chains = np.stack([_ar1(rng, 2000, 0.9) for _ in range(2)])
    assert ess(chains).value < 0.2 * chains.size


def _drawset(draws, names=("a", "b"), **metadata):
    return DrawSet(names=list(names), draws=draws, metadata=dict(metadata))


def test_summarize_columns_and_significance():
    rng = np.random.default_rng(5)
    draws = np.stack([np.column_stack([rng.normal(2.0, 0.1, 200), rng.normal(0.0, 1.0, 200)]) for _ in range(2)])
    summary = summarize(_drawset(draws))
    assert list(summary.columns) == SUMMARY_COLUMNS
    rows = summary.set_index("param")
    assert bool(rows.loc["a", "significant"])
    assert not bool(rows.loc["b", "significant"])
    assert rows.loc["a", "mean"] == pytest.approx(2.0, abs=0.05)


def test_summarize_adds_derived_quantities():
    draws = np.zeros((2, 10, 3))
    draws[:, :, 0] = -2.90
    draws[:, :, 2] = 0.21
    summary = summarize(_drawset(draws, names=("beta0_p", "beta0_m", "gamma"))).set_index("param")
    assert summary.loc["baseline_prevalence", "mean"] == pytest.approx(0.0522, abs=1e-4)
    assert summary.loc["inverse_gamma", "mean"] == pytest.approx(1 / 0.21)


def test_summary_is_invariant_to_chain_order():
    draws = np.random.default_rng(6).standard_normal((3, 50, 2))
    ds = _drawset(draws)
    a = summarize(ds)
    b = summarize(ds.relabel([2, 0, 1]))
    pd.testing.assert_frame_equal(a, b)


def test_empty_draw_set_cannot_be_summarized():
    with pytest.raises(ValidationError):
        summarize(_drawset(np.zeros((2, 0, 2))))


def test_manifest_must_match_draws():
    with pytest.raises(ValidationError):
        DrawSet(names=["a"], draws=np.zeros((1, 5, 2)))


@pytest.mark.parametrize("fmt", ["csv", "npz"])
def test_drawset_save_and_load(tmp_path, fmt):
    rng = np.random.default_rng(7)
    original = DrawSet(
        names=["beta0_p", "b_p[S01]"],
        draws=rng.standard_normal((2, 15, 2)),
        stats={"energy": rng.standard_normal((2, 15)), "divergent": np.zeros((2, 15))},
        metadata={"seed": 3, "config_hash": "abc", "dataset_hash": "def"},
    )
    original.save(tmp_path / "draws", fmt)
    loaded = DrawSet.load(tmp_path / "draws")
    assert loaded.names == original.names
    np.testing.assert_array_equal(loaded.draws, original.draws)
    np.testing.assert_array_equal(loaded.stats["energy"], original.stats["energy"])
    assert loaded.metadata == original.metadata


def test_convergence_gate_requires_enough_draws():
    draws = np.random.default_rng(8).standard_normal((4, MIN_GATE_DRAWS - 1, 1))
    report = convergence_report(_drawset(draws, names=("a",)))
    assert report["max_rhat"] < 1.1
    assert not report["passed"]

    draws = np.random.default_rng(8).standard_normal((4, MIN_GATE_DRAWS, 1))
    assert convergence_report(_drawset(draws, names=("a",)))["passed"]


def test_convergence_report_counts_sampler_problems():
    draws = np.random.default_rng(9).standard_normal((2, 200, 1))
    adaptation = [{"divergences": 2, "max_depth_saturations": 1}, {"divergences": 1, "max_depth_saturations": 0}]
    report = convergence_report(_drawset(draws, names=("a",), adaptation=adaptation))
    assert report["divergences"] == 3
    assert report["max_depth_saturations"] == 1
    assert report["draws_per_chain"] == 200


def test_fit_attaches_metadata(fitted, small_ds):
    data = ModelData.build(small_ds, ModelConfig())
    layout = ParameterLayout.build(data, ModelConfig())
    assert fitted.names == layout.names()
    assert fitted.draws.shape == (2, 30, layout.dim)
    assert fitted.metadata["seed"] == 11
    assert len(fitted.metadata["adaptation"]) == 2
    # 30 retained draws per chain cannot certify convergence
    assert not fitted.metadata["convergence"]["passed"]
    gamma = fitted.chains_of("gamma")
    assert np.all(gamma > 0)
    r = fitted.draws[:, :, [i for i, n in enumerate(fitted.names) if n.startswith("r[")]]
    assert np.all((r > 0) & (r < 1))
