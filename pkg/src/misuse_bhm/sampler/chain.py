"""
ABOUTME: Single-chain driver (initialization, warmup adaptation, thinned sampling) and multi-chain runner
ABOUTME: Each chain's RNG stream is a function of (seed, chain_index) so results never depend on scheduling
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import InitializationError
from ..models import SamplerConfig
from .adaptation import DualAveraging, RunningVariance, build_windows, find_reasonable_step_size
from .nuts import ChainState, nuts_transition

logger = logging.getLogger(__name__)

Target = Callable[[np.ndarray], Tuple[float, np.ndarray]]

STAT_NAMES = ("energy", "divergent", "accept_stat", "tree_depth", "n_leapfrog", "step_size")


@dataclass
class ChainResult:
    """Retained unconstrained draws, per-draw statistics and the adaptation summary."""

    chain: int
    draws: np.ndarray
    stats: Dict[str, np.ndarray]
    adaptation: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, chain_index])


def _finite(logp: float, grad: np.ndarray) -> bool:
    return math.isfinite(logp) and bool(np.all(np.isfinite(grad)))


def initialize(
    cfg: SamplerConfig,
    target: Target,
    dim: int,
    rng: np.random.Generator,
    init: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, float, np.ndarray]:
    """First position with a finite density and gradient.

    A supplied ``init`` is tried first; otherwise (or if it fails) uniform
    draws in ``[-init_jitter, init_jitter]`` are tried ``init_attempts`` times.
    """
    if init is not None:
        z = np.asarray(init, dtype=float)
        if np.all(np.isfinite(z)):
            logp, grad = target(z)
            if _finite(logp, grad):
                return z, logp, grad
        logger.warning("supplied initial point has non-finite density; falling back to jittered draws")
    for _ in range(cfg.init_attempts):
        z = rng.uniform(-cfg.init_jitter, cfg.init_jitter, size=dim)
        logp, grad = target(z)
        if _finite(logp, grad):
            return z, logp, grad
    raise InitializationError(
        f"no finite log density after {cfg.init_attempts} jittered initialization attempts"
    )


def adapt_warmup(state: ChainState, target: Target, cfg: SamplerConfig) -> ChainState:
    """Run ``cfg.warmup`` transitions adapting step size and diagonal mass matrix.

    Dual averaging runs throughout; it is restarted from a fresh step-size
    search whenever a mass-matrix window closes. Adaptation is frozen at the
    dual-averaged step size when warmup ends.
    """
    if cfg.warmup == 0:
        return state
    windows = build_windows(cfg.warmup)
    window_ends = {end: start for start, end in windows}
    window_starts = {start for start, _ in windows}
    dual = state.dual or DualAveraging.start(state.step_size)
    variance: Optional[RunningVariance] = None

    for it in range(cfg.warmup):
        if it in window_starts:
            variance = RunningVariance(state.position.size)
        state = nuts_transition(state, target, cfg.max_tree_depth, cfg.divergence_threshold)
        step = dual.update(state.accept_stat, cfg.target_accept)
        state = replace(state, step_size=step)
        if variance is not None:
            variance.add(state.position)
        if it + 1 in window_ends and variance is not None:
            inv_mass = variance.regularized()
            step = find_reasonable_step_size(
                target, state.position, state.logp, state.grad, inv_mass, state.rng, state.step_size
            )
            dual = DualAveraging.start(step)
            state = replace(state, inverse_mass_diag=inv_mass, step_size=step)
            variance = None
            logger.debug("mass matrix updated after warmup iteration %d", it + 1)

    return replace(state, step_size=dual.final(), dual=dual)


def run_chain(
    cfg: SamplerConfig,
    chain_index: int,
    target: Target,
    init: Optional[np.ndarray] = None,
    dim: Optional[int] = None,
    step_size: Optional[float] = None,
    inverse_mass_diag: Optional[np.ndarray] = None,
) -> ChainResult:
    """Warm up and sample one chain; fully determined by (cfg.seed, chain_index).

    ``step_size`` / ``inverse_mass_diag`` seed adaptation from an earlier run.
    """
    if dim is None:
        if init is None:
            dim = getattr(target, "dim")
        else:
            dim = len(init)
    rng = chain_rng(cfg.seed, chain_index)
    z, logp, grad = initialize(cfg, target, dim, rng, init)
    inv_mass = np.ones(dim) if inverse_mass_diag is None else np.asarray(inverse_mass_diag, dtype=float)
    if step_size is None:
        step_size = find_reasonable_step_size(target, z, logp, grad, inv_mass, rng)
    state = ChainState(
        position=z, logp=logp, grad=grad, step_size=step_size, inverse_mass_diag=inv_mass, rng=rng,
    )
    logger.info("chain %d: warmup %d, sampling %d", chain_index, cfg.warmup, cfg.iterations - cfg.warmup)

    state = adapt_warmup(state, target, cfg)
    warmup_divergences = state.divergences
    state = replace(state, divergences=0, saturations=0)

    n_keep = cfg.retained_per_chain
    draws = np.empty((n_keep, dim))
    stats = {name: np.empty(n_keep) for name in STAT_NAMES}
    kept = 0
    for it in range(cfg.iterations - cfg.warmup):
        state = nuts_transition(state, target, cfg.max_tree_depth, cfg.divergence_threshold)
        if (it + 1) % cfg.thin == 0 and kept < n_keep:
            draws[kept] = state.position
            stats["energy"][kept] = state.energy
            stats["divergent"][kept] = float(state.divergent)
            stats["accept_stat"][kept] = state.accept_stat
            stats["tree_depth"][kept] = state.tree_depth
            stats["n_leapfrog"][kept] = state.n_leapfrog
            stats["step_size"][kept] = state.step_size
            kept += 1

    adaptation = {
        "chain": chain_index,
        "step_size": float(state.step_size),
        "inverse_mass_diag": [float(v) for v in state.inverse_mass_diag],
        "warmup_divergences": int(warmup_divergences),
        "divergences": int(state.divergences),
        "max_depth_saturations": int(state.saturations),
        "mean_accept_stat": float(np.mean(stats["accept_stat"])) if n_keep else None,
    }
    if state.divergences:
        logger.warning("chain %d: %d divergent transitions after warmup", chain_index, state.divergences)
    logger.info("chain %d finished: step size %.3g", chain_index, state.step_size)
    return ChainResult(chain=chain_index, draws=draws, stats=stats, adaptation=adaptation)


def _run_chain_job(args) -> ChainResult:
    cfg, chain_index, target, init, step_size, inv_mass = args
    return run_chain(cfg, chain_index, target, init=init, dim=getattr(target, "dim", None),
                     step_size=step_size, inverse_mass_diag=inv_mass)


def run_chains(
    cfg: SamplerConfig,
    target: Any,
    jobs: int = 1,
    inits: Optional[Sequence[Optional[np.ndarray]]] = None,
    step_size: Optional[float] = None,
    inverse_mass_diag: Optional[np.ndarray] = None,
) -> List[ChainResult]:
    """Run ``cfg.chains`` chains, in worker processes when ``jobs > 1``.

    ``target`` must expose ``dim`` and, for ``jobs > 1``, be picklable.
    """
    inits = list(inits) if inits is not None else [None] * cfg.chains
    args = [
        (cfg, c, target, inits[c] if c < len(inits) else None, step_size, inverse_mass_diag)
        for c in range(cfg.chains)
    ]
    if jobs <= 1 or cfg.chains == 1:
        return [_run_chain_job(a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, cfg.chains)) as pool:
        return list(pool.map(_run_chain_job, args))
