"""
ABOUTME: Parameter layout, constrained ParameterVector and constrained/unconstrained transforms
ABOUTME: Non-centered random effects and horseshoe+ locals; exact log-Jacobian of the inverse transform
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import expit, log_expit, logit

from ..exceptions import DomainError, NumericError
from ..models import GammaConstraint, ModelConfig
from .arrays import ModelData


@dataclass(frozen=True)
class ParameterLayout:
    """Ordered blocks of the unconstrained vector and the matching names.

    The constrained flat vector uses the same block order and sizes, so
    position ``k`` in either vector refers to the same model symbol (an
    innovation on the unconstrained side, the effect on the constrained side).
    """

    blocks: Tuple[Tuple[str, int], ...]
    prevalence_names: Tuple[str, ...]
    mortality_names: Tuple[str, ...]
    state_ids: Tuple[str, ...]
    ratio_state_ids: Tuple[str, ...]
    group_names: Tuple[str, ...]
    gamma_constraint: GammaConstraint
    slices: Dict[str, slice] = field(default_factory=dict, compare=False)

    @classmethod
    def build(cls, data: ModelData, cfg: ModelConfig) -> "ParameterLayout":
        P, M, S = len(data.prevalence_names), len(data.mortality_names), data.n_states
        blocks: List[Tuple[str, int]] = [("beta0_p", 1), ("beta_p", P), ("lambda_p", P), ("zeta_p", P)]
        if P:
            blocks.append(("tau_p", 1))
        if cfg.include_prevalence_random_intercept:
            blocks += [("b_p", S), ("sigma0_p", 1)]
        blocks += [("beta0_m", 1), ("beta_m", M), ("lambda_m", M), ("zeta_m", M)]
        if M:
            blocks.append(("tau_m", 1))
        if cfg.include_mortality_random_intercept:
            blocks += [("b_m", S), ("sigma0_m", 1)]
        blocks += [("gamma", 1), ("r", len(data.ratio_states)), ("sigma_shared", len(data.group_names))]

        slices: Dict[str, slice] = {}
        start = 0
        for name, size in blocks:
            slices[name] = slice(start, start + size)
            start += size
        return cls(
            blocks=tuple(blocks),
            prevalence_names=tuple(data.prevalence_names),
            mortality_names=tuple(data.mortality_names),
            state_ids=tuple(data.state_ids),
            ratio_state_ids=tuple(data.state_ids[s] for s in data.ratio_states),
            group_names=tuple(data.group_names),
            gamma_constraint=cfg.gamma_constraint,
            slices=slices,
        )

    @property
    def dim(self) -> int:
        return sum(size for _, size in self.blocks)

    def has(self, block: str) -> bool:
        return block in self.slices

    def labels(self, block: str) -> List[str]:
        if block in ("beta_p", "lambda_p", "zeta_p"):
            return list(self.prevalence_names)
        if block in ("beta_m", "lambda_m", "zeta_m"):
            return list(self.mortality_names)
        if block in ("b_p", "b_m"):
            return list(self.state_ids)
        if block == "r":
            return list(self.ratio_state_ids)
        if block == "sigma_shared":
            return list(self.group_names)
        return []

    def names(self) -> List[str]:
        """Constrained-scale parameter manifest."""
        out: List[str] = []
        for block, size in self.blocks:
            labels = self.labels(block)
            if labels:
                out += [f"{block}[{label}]" for label in labels]
            else:
                out += [block] * size
        return out

    def unconstrained_names(self) -> List[str]:
        prefix = {
            "beta_p": "beta_p_raw", "beta_m": "beta_m_raw",
            "lambda_p": "log_lambda_p_raw", "lambda_m": "log_lambda_m_raw",
            "zeta_p": "log_zeta_p", "zeta_m": "log_zeta_m",
            "tau_p": "log_tau_p", "tau_m": "log_tau_m",
            "b_p": "b_p_raw", "b_m": "b_m_raw",
            "sigma0_p": "log_sigma0_p", "sigma0_m": "log_sigma0_m",
            "r": "logit_r", "sigma_shared": "log_sigma_shared",
            "gamma": "logit_gamma" if self.gamma_constraint == GammaConstraint.UNIT_INTERVAL else "log_gamma",
        }
        out: List[str] = []
        for block, size in self.blocks:
            base = prefix.get(block, block)
            labels = self.labels(block)
            out += [f"{base}[{label}]" for label in labels] if labels else [base] * size
        return out


@dataclass
class ParameterVector:
    """Constrained-scale parameters; every model symbol lives here or in the data."""

    beta0_p: float
    beta_p: np.ndarray
    lambda_p: np.ndarray
    zeta_p: np.ndarray
    tau_p: Optional[float]
    b_p: Optional[np.ndarray]
    sigma0_p: Optional[float]
    beta0_m: float
    beta_m: np.ndarray
    lambda_m: np.ndarray
    zeta_m: np.ndarray
    tau_m: Optional[float]
    b_m: Optional[np.ndarray]
    sigma0_m: Optional[float]
    gamma: float
    r: np.ndarray
    sigma_shared: np.ndarray

    def flatten(self, layout: ParameterLayout) -> np.ndarray:
        out = np.empty(layout.dim)
        for block, _ in layout.blocks:
            out[layout.slices[block]] = np.atleast_1d(getattr(self, block))
        return out

    @classmethod
    def from_flat(cls, vector: np.ndarray, layout: ParameterLayout) -> "ParameterVector":
        vector = np.asarray(vector, dtype=float)

        def block(name: str, scalar: bool = False):
            if not layout.has(name):
                return None
            values = vector[layout.slices[name]].copy()
            return float(values[0]) if scalar else values

        return cls(
            beta0_p=block("beta0_p", True),
            beta_p=block("beta_p"),
            lambda_p=block("lambda_p"),
            zeta_p=block("zeta_p"),
            tau_p=block("tau_p", True),
            b_p=block("b_p"),
            sigma0_p=block("sigma0_p", True),
            beta0_m=block("beta0_m", True),
            beta_m=block("beta_m"),
            lambda_m=block("lambda_m"),
            zeta_m=block("zeta_m"),
            tau_m=block("tau_m", True),
            b_m=block("b_m"),
            sigma0_m=block("sigma0_m", True),
            gamma=block("gamma", True),
            r=block("r"),
            sigma_shared=block("sigma_shared"),
        )


def _positive(name: str, value) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if (arr <= 0).any():
        raise DomainError(f"{name} must be strictly positive")
    return np.log(arr)


def _unit(name: str, value) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if ((arr <= 0) | (arr >= 1)).any():
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return logit(arr)


def to_unconstrained(theta: ParameterVector, layout: ParameterLayout) -> np.ndarray:
    """Map constrained parameters to the sampler's unconstrained vector."""
    flat = theta.flatten(layout)
    if not np.all(np.isfinite(flat)):
        raise NumericError("non-finite constrained parameter")
    z = np.empty(layout.dim)
    s = layout.slices
    for part in ("p", "m"):
        z[s[f"beta0_{part}"]] = getattr(theta, f"beta0_{part}")
        if layout.has(f"tau_{part}"):
            tau = float(getattr(theta, f"tau_{part}"))
            zeta = np.asarray(getattr(theta, f"zeta_{part}"))
            lam = np.asarray(getattr(theta, f"lambda_{part}"))
            z[s[f"tau_{part}"]] = _positive(f"tau_{part}", tau)
            z[s[f"zeta_{part}"]] = _positive(f"zeta_{part}", zeta)
            z[s[f"lambda_{part}"]] = _positive(f"lambda_{part}", lam) - np.log(tau) - np.log(zeta)
            z[s[f"beta_{part}"]] = np.asarray(getattr(theta, f"beta_{part}")) / lam
        if layout.has(f"sigma0_{part}"):
            sigma = float(getattr(theta, f"sigma0_{part}"))
            z[s[f"sigma0_{part}"]] = _positive(f"sigma0_{part}", sigma)
            z[s[f"b_{part}"]] = np.asarray(getattr(theta, f"b_{part}")) / sigma
    if layout.gamma_constraint == GammaConstraint.UNIT_INTERVAL:
        z[s["gamma"]] = _unit("gamma", theta.gamma)
    else:
        z[s["gamma"]] = _positive("gamma", theta.gamma)
    z[s["r"]] = _unit("r", theta.r) if theta.r.size else theta.r
    z[s["sigma_shared"]] = _positive("sigma_shared", theta.sigma_shared) if theta.sigma_shared.size else theta.sigma_shared
    return z


@dataclass
class Unpacked:
    """Intermediate quantities shared by the value and the gradient."""

    theta: ParameterVector
    log_jacobian: float
    log_lambda: Dict[str, np.ndarray]
    raw_beta: Dict[str, np.ndarray]
    raw_b: Dict[str, np.ndarray]
    log_gamma: float


def unpack(z: np.ndarray, layout: ParameterLayout) -> Unpacked:
    """Inverse transform plus the pieces the gradient needs."""
    z = np.asarray(z, dtype=float)
    if z.shape != (layout.dim,):
        raise DomainError(f"expected unconstrained vector of length {layout.dim}, got {z.shape}")
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite unconstrained vector")
    s = layout.slices
    values: Dict[str, object] = {}
    log_lambda: Dict[str, np.ndarray] = {}
    raw_beta: Dict[str, np.ndarray] = {}
    raw_b: Dict[str, np.ndarray] = {}
    log_jac = 0.0

    for part in ("p", "m"):
        values[f"beta0_{part}"] = float(z[s[f"beta0_{part}"]][0])
        raw = z[s[f"beta_{part}"]]
        if layout.has(f"tau_{part}"):
            log_tau = float(z[s[f"tau_{part}"]][0])
            log_zeta = z[s[f"zeta_{part}"]]
            log_lam = log_tau + log_zeta + z[s[f"lambda_{part}"]]
            lam = np.exp(log_lam)
            values[f"tau_{part}"] = float(np.exp(log_tau))
            values[f"zeta_{part}"] = np.exp(log_zeta)
            values[f"lambda_{part}"] = lam
            values[f"beta_{part}"] = lam * raw
            # tau, zeta via exp; lambda w.r.t. its own innovation; beta = lambda * raw
            log_jac += log_tau + log_zeta.sum() + 2.0 * log_lam.sum()
        else:
            log_lam = np.zeros(0)
            values[f"tau_{part}"] = None
            for key in ("zeta", "lambda", "beta"):
                values[f"{key}_{part}"] = np.zeros(0)
        log_lambda[part] = log_lam
        raw_beta[part] = raw

        if layout.has(f"sigma0_{part}"):
            log_sigma = float(z[s[f"sigma0_{part}"]][0])
            sigma = float(np.exp(log_sigma))
            innovations = z[s[f"b_{part}"]]
            values[f"sigma0_{part}"] = sigma
            values[f"b_{part}"] = sigma * innovations
            raw_b[part] = innovations
            log_jac += log_sigma * (1 + innovations.size)
        else:
            values[f"sigma0_{part}"] = None
            values[f"b_{part}"] = None

    zg = float(z[s["gamma"]][0])
    if layout.gamma_constraint == GammaConstraint.UNIT_INTERVAL:
        values["gamma"] = float(expit(zg))
        log_gamma = float(log_expit(zg))
        log_jac += log_gamma + float(log_expit(-zg))
    else:
        values["gamma"] = float(np.exp(zg))
        log_gamma = zg
        log_jac += zg

    zr = z[s["r"]]
    values["r"] = expit(zr)
    log_jac += float(np.sum(log_expit(zr) + log_expit(-zr)))

    zs = z[s["sigma_shared"]]
    values["sigma_shared"] = np.exp(zs)
    log_jac += float(zs.sum())

    return Unpacked(
        theta=ParameterVector(**values),
        log_jacobian=float(log_jac),
        log_lambda=log_lambda,
        raw_beta=raw_beta,
        raw_b=raw_b,
        log_gamma=log_gamma,
    )


def from_unconstrained(z: np.ndarray, layout: ParameterLayout) -> Tuple[ParameterVector, float]:
    """Constrained parameters and the log-determinant of the inverse transform."""
    unpacked = unpack(z, layout)
    return unpacked.theta, unpacked.log_jacobian
