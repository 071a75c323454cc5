"""
ABOUTME: Warmup adaptation utilities: dual-averaging step size, running variance, window schedule
ABOUTME: Also the initial step-size search used before warmup and after every mass-matrix update
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from ..exceptions import AdaptationError

logger = logging.getLogger(__name__)

Target = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# Stan-style schedule for large warmups
INIT_BUFFER = 75
BASE_WINDOW = 25
TERM_BUFFER = 50
MIN_ADAPTIVE_WARMUP = 20

STEP_SIZE_MIN = 1e-8
STEP_SIZE_MAX = 1e2


@dataclass
class DualAveraging:
    """Nesterov dual averaging of log step size toward a target acceptance rate."""

    mu: float
    log_eps: float = 0.0
    log_eps_bar: float = 0.0
    h_bar: float = 0.0
    t: int = 0
    gamma: float = 0.05
    t0: float = 10.0
    kappa: float = 0.75

    @classmethod
    def start(cls, step_size: float) -> "DualAveraging":
        return cls(mu=math.log(10.0 * step_size), log_eps=math.log(step_size))

    def update(self, accept_stat: float, target: float) -> float:
        if not math.isfinite(accept_stat):
            raise AdaptationError("acceptance statistic is not finite during warmup")
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (target - accept_stat)
        self.log_eps = self.mu - (math.sqrt(self.t) / self.gamma) * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar
        return math.exp(self.log_eps)

    def final(self) -> float:
        return math.exp(self.log_eps_bar) if self.t else math.exp(self.log_eps)


class RunningVariance:
    """Welford accumulator of per-coordinate variance."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self.m2 = self.m2 + delta * (x - self.mean)

    def regularized(self) -> np.ndarray:
        """Variance shrunk toward 1e-3 with weight 5 / (n + 5)."""
        n = self.n
        var = self.m2 / (n - 1) if n > 1 else np.ones_like(self.mean)
        return (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))


def build_windows(warmup: int) -> List[Tuple[int, int]]:
    """Mass-matrix adaptation windows as half-open iteration ranges.

    75-iteration initial buffer, doubling windows from 25, 50-iteration
    terminal buffer; shorter warmups scale the buffers to 15% / 75% / 10%.
    A window is stretched to the terminal buffer when the next doubled
    window would not fit.
    """
    if warmup <= MIN_ADAPTIVE_WARMUP:
        return []
    if warmup >= INIT_BUFFER + BASE_WINDOW + TERM_BUFFER:
        init_buffer, base, term_buffer = INIT_BUFFER, BASE_WINDOW, TERM_BUFFER
    else:
        init_buffer = max(1, int(0.15 * warmup))
        term_buffer = max(1, int(0.10 * warmup))
        base = max(1, warmup - init_buffer - term_buffer)

    end_middle = warmup - term_buffer
    windows: List[Tuple[int, int]] = []
    start, size = init_buffer, base
    while start < end_middle:
        stop = start + size
        if stop + 2 * size > end_middle:
            stop = end_middle
        windows.append((start, stop))
        start, size = stop, 2 * size
    return windows


def _kinetic(p: np.ndarray, inv_mass: np.ndarray) -> float:
    return 0.5 * float(np.dot(p, inv_mass * p))


def find_reasonable_step_size(
    target: Target,
    z: np.ndarray,
    logp: float,
    grad: np.ndarray,
    inv_mass: np.ndarray,
    rng: np.random.Generator,
    step_size: float = 1.0,
) -> float:
    """Double or halve the step until one leapfrog's acceptance crosses 0.5."""
    p = rng.standard_normal(z.size) / np.sqrt(inv_mass)
    h0 = -logp + _kinetic(p, inv_mass)

    def log_ratio(eps: float) -> float:
        p_half = p + 0.5 * eps * grad
        z1 = z + eps * inv_mass * p_half
        logp1, grad1 = target(z1)
        p1 = p_half + 0.5 * eps * grad1
        h1 = -logp1 + _kinetic(p1, inv_mass)
        return h0 - h1 if math.isfinite(h1) else -math.inf

    eps = step_size
    direction = 1.0 if log_ratio(eps) > math.log(0.5) else -1.0
    while STEP_SIZE_MIN < eps < STEP_SIZE_MAX:
        ratio = log_ratio(eps)
        if direction * ratio <= -direction * math.log(2.0):
            break
        eps *= 2.0 ** direction
    eps = min(max(eps, STEP_SIZE_MIN), STEP_SIZE_MAX)
    logger.debug("initial step size %.3g", eps)
    return eps
