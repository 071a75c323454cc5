"""
ABOUTME: Multinomial No-U-Turn transition with a diagonal Euclidean metric
ABOUTME: Recursive tree doubling, generalized U-turn checks across subtrees, divergence detection
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np

from ..exceptions import NumericError
from .adaptation import DualAveraging

Target = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass
class ChainState:
    """Everything one chain carries from iteration to iteration."""

    position: np.ndarray
    logp: float
    grad: np.ndarray
    step_size: float
    inverse_mass_diag: np.ndarray
    rng: np.random.Generator
    dual: Optional[DualAveraging] = None
    divergences: int = 0
    saturations: int = 0
    # statistics of the most recent transition
    accept_stat: float = float("nan")
    tree_depth: int = 0
    n_leapfrog: int = 0
    energy: float = float("nan")
    divergent: bool = False


@dataclass
class _Point:
    z: np.ndarray
    p: np.ndarray
    logp: float
    grad: np.ndarray


@dataclass
class _Subtree:
    """A subtree in build order: ``beg`` is the first leaf produced, ``end`` the last."""

    end: _Point
    p_beg: np.ndarray
    p_sharp_beg: np.ndarray
    p_end: np.ndarray
    p_sharp_end: np.ndarray
    rho: np.ndarray
    log_weight: float
    sample: _Point
    valid: bool = True
    divergent: bool = False
    sum_alpha: float = 0.0
    n_leapfrog: int = 0


@dataclass
class _Integrator:
    target: Target
    step_size: float
    inv_mass: np.ndarray
    h0: float
    threshold: float
    rng: np.random.Generator = field(repr=False)

    def kinetic(self, p: np.ndarray) -> float:
        return 0.5 * float(np.dot(p, self.inv_mass * p))

    def leapfrog(self, point: _Point, direction: int) -> _Point:
        eps = direction * self.step_size
        p_half = point.p + 0.5 * eps * point.grad
        z = point.z + eps * self.inv_mass * p_half
        logp, grad = self.target(z)
        return _Point(z=z, p=p_half + 0.5 * eps * grad, logp=logp, grad=grad)


def no_u_turn(p_sharp_minus: np.ndarray, p_sharp_plus: np.ndarray, rho: np.ndarray) -> bool:
    return float(np.dot(p_sharp_plus, rho)) > 0.0 and float(np.dot(p_sharp_minus, rho)) > 0.0


def build_tree(start: _Point, direction: int, depth: int, integ: _Integrator) -> _Subtree:
    """Grow ``2**depth`` leapfrog steps from ``start`` with multinomial weights."""
    if depth == 0:
        point = integ.leapfrog(start, direction)
        h = -point.logp + integ.kinetic(point.p)
        if not math.isfinite(h):
            h = math.inf
        delta = h - integ.h0
        divergent = delta > integ.threshold
        p_sharp = integ.inv_mass * point.p
        return _Subtree(
            end=point,
            p_beg=point.p,
            p_sharp_beg=p_sharp,
            p_end=point.p,
            p_sharp_end=p_sharp,
            rho=point.p.copy(),
            log_weight=-delta,
            sample=point,
            valid=not divergent,
            divergent=divergent,
            sum_alpha=min(1.0, math.exp(-delta)) if math.isfinite(delta) else 0.0,
            n_leapfrog=1,
        )

    init = build_tree(start, direction, depth - 1, integ)
    if not init.valid:
        return init
    final = build_tree(init.end, direction, depth - 1, integ)
    sum_alpha = init.sum_alpha + final.sum_alpha
    n_leapfrog = init.n_leapfrog + final.n_leapfrog
    if not final.valid:
        return replace(final, valid=False, sum_alpha=sum_alpha, n_leapfrog=n_leapfrog)

    log_weight = float(np.logaddexp(init.log_weight, final.log_weight))
    sample = init.sample
    if math.log(integ.rng.uniform()) < final.log_weight - log_weight:
        sample = final.sample

    rho = init.rho + final.rho
    persist = no_u_turn(init.p_sharp_beg, final.p_sharp_end, rho)
    persist = persist and no_u_turn(init.p_sharp_beg, final.p_sharp_beg, init.rho + final.p_beg)
    persist = persist and no_u_turn(init.p_sharp_end, final.p_sharp_end, final.rho + init.p_end)

    return _Subtree(
        end=final.end,
        p_beg=init.p_beg,
        p_sharp_beg=init.p_sharp_beg,
        p_end=final.p_end,
        p_sharp_end=final.p_sharp_end,
        rho=rho,
        log_weight=log_weight,
        sample=sample,
        valid=persist,
        sum_alpha=sum_alpha,
        n_leapfrog=n_leapfrog,
    )


def nuts_transition(
    state: ChainState,
    target: Target,
    max_tree_depth: int = 10,
    divergence_threshold: float = 1000.0,
) -> ChainState:
    """One multinomial NUTS update; returns the successor state."""
    if not math.isfinite(state.logp) or not np.all(np.isfinite(state.grad)):
        raise NumericError("non-finite log density or gradient at the current position")

    rng = state.rng
    inv_mass = state.inverse_mass_diag
    p0 = rng.standard_normal(state.position.size) / np.sqrt(inv_mass)
    integ = _Integrator(
        target=target,
        step_size=state.step_size,
        inv_mass=inv_mass,
        h0=-state.logp + 0.5 * float(np.dot(p0, inv_mass * p0)),
        threshold=divergence_threshold,
        rng=rng,
    )
    origin = _Point(z=state.position, p=p0, logp=state.logp, grad=state.grad)

    fwd = bck = origin
    p_sharp0 = inv_mass * p0
    p_sharp_fwd = p_sharp_bck = p_sharp0
    rho = p0.copy()
    sample = origin
    log_sum_weight = 0.0
    depth = 0
    sum_alpha = 0.0
    n_leapfrog = 0
    divergent = False

    while depth < max_tree_depth:
        forward = rng.uniform() > 0.5
        if forward:
            rho_bck, p_bck_fwd, p_sharp_bck_fwd = rho, fwd.p, p_sharp_fwd
            sub = build_tree(fwd, 1, depth, integ)
            rho_fwd, p_fwd_bck, p_sharp_fwd_bck = sub.rho, sub.p_beg, sub.p_sharp_beg
        else:
            rho_fwd, p_fwd_bck, p_sharp_fwd_bck = rho, bck.p, p_sharp_bck
            sub = build_tree(bck, -1, depth, integ)
            rho_bck, p_bck_fwd, p_sharp_bck_fwd = sub.rho, sub.p_beg, sub.p_sharp_beg

        sum_alpha += sub.sum_alpha
        n_leapfrog += sub.n_leapfrog
        if sub.divergent:
            divergent = True
        if not sub.valid:
            break
        if forward:
            fwd, p_sharp_fwd = sub.end, sub.p_sharp_end
        else:
            bck, p_sharp_bck = sub.end, sub.p_sharp_end
        depth += 1

        # biased progressive sampling favours the newer subtree
        if sub.log_weight > log_sum_weight:
            sample = sub.sample
        elif math.log(rng.uniform()) < sub.log_weight - log_sum_weight:
            sample = sub.sample
        log_sum_weight = float(np.logaddexp(log_sum_weight, sub.log_weight))

        rho = rho_bck + rho_fwd
        persist = no_u_turn(p_sharp_bck, p_sharp_fwd, rho)
        persist = persist and no_u_turn(p_sharp_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck)
        persist = persist and no_u_turn(p_sharp_bck_fwd, p_sharp_fwd, rho_fwd + p_bck_fwd)
        if not persist:
            break

    energy = -sample.logp + integ.kinetic(sample.p)
    return replace(
        state,
        position=sample.z,
        logp=sample.logp,
        grad=sample.grad,
        divergences=state.divergences + int(divergent),
        saturations=state.saturations + int(depth >= max_tree_depth),
        accept_stat=sum_alpha / n_leapfrog if n_leapfrog else 0.0,
        tree_depth=depth,
        n_leapfrog=n_leapfrog,
        energy=energy,
        divergent=divergent,
    )
