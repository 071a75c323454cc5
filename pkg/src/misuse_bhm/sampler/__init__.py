"""
ABOUTME: Gradient-based MCMC: multinomial NUTS with warmup adaptation, generic over log-density targets
"""

from .adaptation import DualAveraging, RunningVariance, build_windows, find_reasonable_step_size
from .chain import ChainResult, adapt_warmup, initialize, run_chain, run_chains
from .nuts import ChainState, nuts_transition

__all__ = [
    "ChainResult",
    "ChainState",
    "DualAveraging",
    "RunningVariance",
    "adapt_warmup",
    "build_windows",
    "find_reasonable_step_size",
    "initialize",
    "nuts_transition",
    "run_chain",
    "run_chains",
]
