"""
ABOUTME: Multi-chain fitting of the prepared model, convergence diagnostics and posterior summaries
ABOUTME: DrawSet holds constrained draws with run metadata and persists to CSV-per-chain or npz
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.special import expit
from scipy.stats import norm, rankdata

from .data import dataset_hash
from .exceptions import InitializationError, RunError, ValidationError
from .model import ModelData, ParameterLayout, PosteriorTarget, from_unconstrained
from .models import Dataset, ModelConfig, SamplerConfig
from .sampler import run_chains
from .utils.files import read_csv, read_json, write_csv, write_json

logger = logging.getLogger(__name__)

RHAT_GATE = 1.1
# convergence is not certified from fewer retained draws per chain
MIN_GATE_DRAWS = 100
SUMMARY_COLUMNS = ["param", "mean", "sd", "p2.5", "p50", "p97.5", "rhat", "ess", "significant"]
DRAWSET_FILE = "drawset.json"


class Diagnostic(NamedTuple):
    value: float
    degenerate: bool = False


@dataclass
class DrawSet:
    """Constrained posterior draws indexed (chain, retained iteration, parameter)."""

    names: List[str]
    draws: np.ndarray
    stats: Dict[str, np.ndarray] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.draws = np.asarray(self.draws, dtype=float)
        if self.draws.ndim != 3 or self.draws.shape[2] != len(self.names):
            raise ValidationError("draws must be (chains, iterations, parameters) matching the manifest")

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[1]

    @property
    def n_total(self) -> int:
        return self.n_chains * self.n_draws

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValidationError(f"parameter {name!r} not in draw set")

    def chains_of(self, name: str) -> np.ndarray:
        return self.draws[:, :, self.index(name)]

    def pooled(self) -> np.ndarray:
        """All draws stacked as (n_total, n_params)."""
        return self.draws.reshape(-1, len(self.names))

    def relabel(self, order: Sequence[int]) -> "DrawSet":
        return DrawSet(
            names=list(self.names),
            draws=self.draws[list(order)],
            stats={k: v[list(order)] for k, v in self.stats.items()},
            metadata=dict(self.metadata),
        )

    def save(self, directory: Path, fmt: str = "csv") -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        meta = {k: self.metadata.get(k) for k in ("config_hash", "seed")}
        if fmt == "npz":
            np.savez_compressed(directory / "draws.npz", draws=self.draws,
                                **{f"stat_{k}": v for k, v in self.stats.items()})
        elif fmt == "csv":
            for c in range(self.n_chains):
                frame = pd.DataFrame(self.draws[c], columns=self.names)
                frame.insert(0, "iter", np.arange(self.n_draws))
                frame.insert(0, "chain", c)
                for stat in ("energy", "divergent"):
                    values = self.stats.get(stat)
                    frame[stat] = values[c] if values is not None else np.nan
                write_csv(frame, directory / f"chain_{c}.csv", meta)
        else:
            raise ValidationError(f"unknown draw format {fmt!r}")
        write_json({"format": fmt, "names": self.names, "n_chains": self.n_chains,
                    "n_draws": self.n_draws, "metadata": self.metadata},
                   directory / DRAWSET_FILE, meta)
        return directory

    @classmethod
    def load(cls, directory: Path) -> "DrawSet":
        directory = Path(directory)
        manifest_path = directory / DRAWSET_FILE
        if not manifest_path.exists():
            raise RunError(f"no draw set found in {directory}")
        manifest = read_json(manifest_path)
        names = manifest["names"]
        if manifest["format"] == "npz":
            with np.load(directory / "draws.npz") as archive:
                draws = archive["draws"]
                stats = {k[len("stat_"):]: archive[k] for k in archive.files if k.startswith("stat_")}
        else:
            frames = [read_csv(directory / f"chain_{c}.csv") for c in range(manifest["n_chains"])]
            draws = np.stack([f[names].to_numpy(dtype=float).reshape(-1, len(names)) for f in frames])
            stats = {s: np.stack([f[s].to_numpy(dtype=float) for f in frames]) for s in ("energy", "divergent")}
        return cls(names=names, draws=draws, stats=stats, metadata=manifest.get("metadata", {}))


def _split(chains: np.ndarray) -> np.ndarray:
    half = chains.shape[1] // 2
    return np.vstack([chains[:, :half], chains[:, chains.shape[1] - half:]])


def _rhat_classic(chains: np.ndarray) -> float:
    n = chains.shape[1]
    within = chains.var(axis=1, ddof=1).mean()
    between = n * chains.mean(axis=1).var(ddof=1)
    var_hat = (n - 1) / n * within + between / n
    return float(np.sqrt(var_hat / within))


def _rank_normalize(chains: np.ndarray) -> np.ndarray:
    ranks = rankdata(chains, method="average").reshape(chains.shape)
    return norm.ppf((ranks - 0.375) / (chains.size + 0.25))


def _check_shape(chains: np.ndarray) -> np.ndarray:
    chains = np.asarray(chains, dtype=float)
    if chains.ndim == 1:
        chains = chains[None, :]
    if chains.ndim != 2 or chains.shape[1] < 4:
        raise ValidationError("diagnostics need (chains, draws) with at least 4 draws per chain")
    return chains


def rhat(chains: np.ndarray) -> Diagnostic:
    """Rank-normalized split R-hat: max of the bulk and folded-tail versions."""
    chains = _check_shape(chains)
    split = _split(chains)
    if np.all(split.var(axis=1) == 0.0):
        return Diagnostic(1.0, True)
    bulk = _rhat_classic(_rank_normalize(split))
    folded = np.abs(split - np.median(split))
    tail = _rhat_classic(_rank_normalize(folded))
    return Diagnostic(max(bulk, tail), False)


def _autocovariance(x: np.ndarray) -> np.ndarray:
    n = x.size
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    centered = x - x.mean()
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conjugate(spectrum), size)[:n]
    return acov / n


def ess(chains: np.ndarray) -> Diagnostic:
    """Effective sample size with Geyer's initial monotone sequence truncation."""
    chains = _check_shape(chains)
    m, n = chains.shape
    if np.all(chains.var(axis=1) == 0.0):
        return Diagnostic(float("nan"), True)
    acov = np.stack([_autocovariance(c) for c in chains])
    chain_var = acov[:, 0] * n / (n - 1.0)
    within = chain_var.mean()
    var_plus = within * (n - 1.0) / n
    if m > 1:
        var_plus += chains.mean(axis=1).var(ddof=1)
    rho = 1.0 - (within - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    pairs = []
    for t in range(0, n - 1, 2):
        pair = rho[t] + rho[t + 1]
        if pair < 0.0:
            break
        pairs.append(pair)
    pairs = np.minimum.accumulate(np.asarray(pairs)) if pairs else np.array([1.0])
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / np.log10(max(m * n, 10)))
    return Diagnostic(float(m * n / tau), False)


def _derived_columns(drawset: DrawSet) -> Dict[str, np.ndarray]:
    toggles = drawset.metadata.get("derived", {})
    out: Dict[str, np.ndarray] = {}
    names = drawset.names
    if toggles.get("inverse_gamma", True) and "gamma" in names:
        out["inverse_gamma"] = 1.0 / drawset.chains_of("gamma")
    if toggles.get("baseline_prevalence", True) and "beta0_p" in names:
        out["baseline_prevalence"] = expit(drawset.chains_of("beta0_p"))
    if toggles.get("baseline_mortality", True) and "beta0_m" in names:
        out["baseline_mortality"] = expit(drawset.chains_of("beta0_m"))
    return out


def _summary_row(name: str, chains: np.ndarray) -> Dict[str, Any]:
    pooled = chains.ravel()
    lo, mid, hi = np.percentile(pooled, [2.5, 50.0, 97.5])
    enough = chains.shape[1] >= 4
    return {
        "param": name,
        "mean": float(pooled.mean()),
        "sd": float(pooled.std(ddof=1)) if pooled.size > 1 else 0.0,
        "p2.5": float(lo),
        "p50": float(mid),
        "p97.5": float(hi),
        "rhat": rhat(chains).value if enough else float("nan"),
        "ess": ess(chains).value if enough else float("nan"),
        "significant": bool(lo > 0.0 or hi < 0.0),
    }


def summarize(drawset: DrawSet) -> pd.DataFrame:
    """Per-parameter posterior summary; significance means the 95% CrI excludes zero."""
    if drawset.n_total == 0:
        raise ValidationError("cannot summarize an empty draw set")
    rows = [_summary_row(name, drawset.draws[:, :, j]) for j, name in enumerate(drawset.names)]
    rows += [_summary_row(name, chains) for name, chains in _derived_columns(drawset).items()]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def convergence_report(drawset: DrawSet, summary: Optional[pd.DataFrame] = None) -> Dict[str, Any]:
    """Gate on max R-hat < 1.1 plus divergence, saturation and ESS figures."""
    degenerate: List[str] = []
    max_rhat, worst = float("nan"), None
    min_ess = float("nan")
    if drawset.n_draws >= 4:
        rhats, esses = [], []
        for j, name in enumerate(drawset.names):
            chains = drawset.draws[:, :, j]
            r = rhat(chains)
            if r.degenerate:
                degenerate.append(name)
            rhats.append(r.value)
            e = ess(chains)
            if not e.degenerate:
                esses.append(e.value)
        if rhats:
            k = int(np.argmax(rhats))
            max_rhat, worst = float(rhats[k]), drawset.names[k]
        if esses:
            min_ess = float(min(esses))

    adaptation = drawset.metadata.get("adaptation", [])
    divergences = int(sum(a.get("divergences", 0) for a in adaptation))
    saturations = int(sum(a.get("max_depth_saturations", 0) for a in adaptation))
    sampler = drawset.metadata.get("sampler", {})
    passed = bool(np.isfinite(max_rhat) and max_rhat < RHAT_GATE and drawset.n_draws >= MIN_GATE_DRAWS)
    return {
        "passed": passed,
        "rhat_threshold": RHAT_GATE,
        "max_rhat": max_rhat,
        "max_rhat_param": worst,
        "min_ess": min_ess,
        "divergences": divergences,
        "max_depth_saturations": saturations,
        "degenerate": degenerate,
        "n_chains": drawset.n_chains,
        "draws_per_chain": drawset.n_draws,
        "engineering_defaults": {
            "target_accept": sampler.get("target_accept"),
            "max_tree_depth": sampler.get("max_tree_depth"),
            "divergence_threshold": sampler.get("divergence_threshold"),
        },
    }


def _warm_start(previous: Optional[DrawSet]):
    if previous is None:
        return None, None
    adaptation = previous.metadata.get("adaptation") or []
    if not adaptation:
        return None, None
    step = float(np.median([a["step_size"] for a in adaptation]))
    mass = np.median(np.array([a["inverse_mass_diag"] for a in adaptation]), axis=0)
    return step, mass


def fit(
    ds: Dataset,
    mcfg: ModelConfig,
    scfg: SamplerConfig,
    *,
    holdout_deaths: Iterable[str] = (),
    holdout_estimates: Iterable[str] = (),
    jobs: int = 1,
    config_hash: Optional[str] = None,
    warm_start: Optional[DrawSet] = None,
) -> DrawSet:
    """Run all chains, back-transform to the constrained scale and attach metadata.

    Initialization failure in any chain is a RunError; non-convergence is only
    reported in ``metadata['convergence']``.
    """
    data = ModelData.build(ds, mcfg, holdout_deaths, holdout_estimates)
    target = PosteriorTarget(data, mcfg)
    layout: ParameterLayout = target.layout
    step, mass = _warm_start(warm_start)
    if mass is not None and mass.size != layout.dim:
        step, mass = None, None
    logger.info("fitting %d parameters with %d chains", layout.dim, scfg.chains)

    try:
        results = run_chains(scfg, target, jobs=jobs, step_size=step, inverse_mass_diag=mass)
    except InitializationError as e:
        raise RunError(f"chain initialization failed: {e}") from e

    draws = np.empty((scfg.chains, scfg.retained_per_chain, layout.dim))
    for c, result in enumerate(results):
        for i, z in enumerate(result.draws):
            theta, _ = from_unconstrained(z, layout)
            draws[c, i] = theta.flatten(layout)
    stats = {name: np.stack([r.stats[name] for r in results]) for name in results[0].stats} if results else {}

    metadata = {
        "seed": scfg.seed,
        "config_hash": config_hash,
        "dataset_hash": dataset_hash(ds),
        "model": mcfg.model_dump(mode="json"),
        "sampler": scfg.model_dump(mode="json"),
        "derived": mcfg.derived.model_dump(mode="json"),
        "holdout_deaths": sorted(set(holdout_deaths)),
        "holdout_estimates": sorted(set(holdout_estimates)),
        "adaptation": [r.adaptation for r in results],
    }
    drawset = DrawSet(names=layout.names(), draws=draws, stats=stats, metadata=metadata)
    report = convergence_report(drawset)
    drawset.metadata["convergence"] = report
    if report["passed"]:
        logger.info("convergence gate passed: max R-hat %.3f", report["max_rhat"])
    else:
        logger.warning("convergence gate not passed: max R-hat %s (%s)", report["max_rhat"], report["max_rhat_param"])
    return drawset
