"""
ABOUTME: K-fold cross-validation of county prevalence estimates and of death counts,
ABOUTME: plus leave-one-state-out validation with the reduced model
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.special import pdtr

from ..exceptions import ValidationError
from ..inference import DrawSet, fit
from ..models import CvReport, CvUnit, Dataset, FoldResult, ModelConfig, SamplerConfig
from ..predict import county_estimate_means, posterior_rates, predictive_prevalence

logger = logging.getLogger(__name__)

INTERVALS = ("predictive", "expected")
SUPPRESSION_LEVEL = 0.95


def assign_folds(n_units: int, k: int, seed: int, strata: Optional[Sequence[int]] = None) -> np.ndarray:
    """Fold index per unit.

    Units are shuffled within each stratum and dealt round-robin, continuing
    across strata, so every stratum is spread evenly over the folds.
    """
    if k < 2:
        raise ValidationError("at least two folds are required")
    if n_units < k:
        raise ValidationError(f"cannot split {n_units} units into {k} folds")
    rng = np.random.default_rng(seed)
    strata = np.zeros(n_units, dtype=int) if strata is None else np.asarray(strata)
    order = np.concatenate([rng.permutation(np.flatnonzero(strata == s)) for s in np.unique(strata)])
    folds = np.empty(n_units, dtype=int)
    folds[order] = np.arange(n_units) % k
    return folds


def fold_seed(seed: int, fold: int) -> int:
    """Independent seed for one refit, derived from the run seed."""
    return int(np.random.SeedSequence([seed, fold + 1]).generate_state(1, dtype=np.uint32)[0])


def _fold_sampler(scfg: SamplerConfig, fold: int, warm: bool) -> SamplerConfig:
    update: Dict[str, int] = {"seed": fold_seed(scfg.seed, fold)}
    if warm and scfg.warmup:
        # same retained draws, half the warmup
        shorter = scfg.warmup // 2
        update.update(warmup=shorter, iterations=scfg.iterations - (scfg.warmup - shorter))
    return scfg.model_copy(update=update)


def _fold_result(fold: int, n_units: int, drawset: DrawSet) -> FoldResult:
    report = drawset.metadata.get("convergence", {})
    max_rhat = report.get("max_rhat", float("nan"))
    return FoldResult(
        fold=fold,
        n_units=n_units,
        max_rhat=float(max_rhat) if max_rhat is not None else float("nan"),
        converged=bool(report.get("passed", False)),
    )


def _correlation(kind: str, x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if x.size < 2 or np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return None
    if kind == "spearman":
        value = stats.spearmanr(x, y)[0]
    else:
        value = stats.pearsonr(x, y)[0]
    return float(value) if np.isfinite(value) else None


def cv_metrics(observed, predicted, lower, upper) -> Dict[str, Optional[float]]:
    """MAPE, interval coverage and correlations over observed units."""
    observed = np.asarray(observed, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if observed.size == 0:
        return {"mape": None, "coverage": None, "rank_correlation": None, "linear_correlation": None}
    nonzero = observed != 0.0
    mape = float(np.mean(np.abs(predicted[nonzero] - observed[nonzero]) / np.abs(observed[nonzero]))) \
        if nonzero.any() else None
    return {
        "mape": mape,
        "coverage": float(np.mean((lower <= observed) & (observed <= upper))),
        "rank_correlation": _correlation("spearman", predicted, observed),
        "linear_correlation": _correlation("pearson", predicted, observed),
    }


def _scored(units: List[CvUnit], folds: List[FoldResult]) -> List[CvUnit]:
    good = {f.fold for f in folds if f.converged}
    dropped = [f.fold for f in folds if not f.converged]
    if dropped:
        logger.warning("folds %s did not converge and are excluded from aggregates", dropped)
    return [u for u in units if u.fold in good]


def _report(kind: str, units: List[CvUnit], folds: List[FoldResult]) -> CvReport:
    scored = [u for u in _scored(units, folds) if u.observed is not None and not u.suppressed]
    metrics = cv_metrics(
        [u.observed for u in scored], [u.predicted_mean for u in scored],
        [u.lower for u in scored], [u.upper for u in scored],
    )
    return CvReport(kind=kind, folds=folds, units=units, **metrics)


def _check_interval(interval: str) -> None:
    if interval not in INTERVALS:
        raise ValidationError(f"interval must be one of {INTERVALS}, got {interval!r}")


def interval_percentiles(level: float) -> List[float]:
    """Equal-tailed percentiles of a central interval at ``level``."""
    if not 0.0 < level < 1.0:
        raise ValidationError(f"interval level must lie in (0, 1), got {level}")
    tail = 50.0 * (1.0 - level)
    return [tail, 100.0 - tail]


def kfold_cv_prevalence(
    ds: Dataset,
    mcfg: ModelConfig,
    scfg: SamplerConfig,
    k: int = 10,
    seed: int = 0,
    *,
    jobs: int = 1,
    warm_start: Optional[DrawSet] = None,
    interval: str = "predictive",
    level: float = 0.95,
) -> CvReport:
    """Hold out county prevalence estimates fold by fold; deaths stay in the likelihood."""
    _check_interval(interval)
    percentiles = interval_percentiles(level)
    estimates = list(ds.county_estimates)
    if len(estimates) < k:
        raise ValidationError(f"{len(estimates)} county estimates cannot fill {k} folds")
    state_of = {c.county_id: c.state_id for c in ds.counties}
    folds = assign_folds(len(estimates), k, seed)

    units: List[CvUnit] = []
    results: List[FoldResult] = []
    for f in range(k):
        held = [e.county_id for e, g in zip(estimates, folds) if g == f]
        logger.info("prevalence CV fold %d/%d: %d held-out estimates", f + 1, k, len(held))
        drawset = fit(ds, mcfg, _fold_sampler(scfg, f, warm_start is not None),
                      holdout_estimates=held, jobs=jobs, warm_start=warm_start)
        results.append(_fold_result(f, len(held), drawset))
        held_set = set(held)

        rates = posterior_rates(drawset, ds, mcfg)
        if interval == "predictive":
            draws = predictive_prevalence(drawset, ds, fold_seed(seed, f), rates)["county"]
        else:
            draws = county_estimate_means(rates)
        mean = county_estimate_means(rates).mean(axis=0)
        lo, hi = np.percentile(draws, percentiles, axis=0)
        rows = {county_id: e for e, county_id in enumerate(rates.data.county_ids[i] for i in rates.data.est_county)}
        for est in estimates:
            if est.county_id not in held_set:
                continue
            e = rows[est.county_id]
            units.append(CvUnit(
                unit_id=est.county_id, state_id=state_of[est.county_id], fold=f,
                observed=est.prev_est, predicted_mean=float(mean[e]),
                lower=float(lo[e]), upper=float(hi[e]),
                covered=bool(lo[e] <= est.prev_est <= hi[e]),
            ))
    return _report("cv_prevalence", units, results)


def _death_units(drawset: DrawSet, ds: Dataset, mcfg: ModelConfig, held: List[str], f: int,
                 seed: int, interval: str, level: float = 0.95) -> List[CvUnit]:
    rates = posterior_rates(drawset, ds, mcfg)
    lam = rates.expected_deaths
    index = {county_id: i for i, county_id in enumerate(rates.data.county_ids)}
    cols = [index[c] for c in held]
    lam = lam[:, cols]
    if interval == "predictive":
        draws = np.random.default_rng(fold_seed(seed, f)).poisson(lam).astype(float)
    else:
        draws = lam
    lo, hi = np.percentile(draws, interval_percentiles(level), axis=0)
    mean = lam.mean(axis=0)
    p_below = pdtr(ds.suppression_threshold, lam).mean(axis=0)

    records = {c.county_id: c for c in ds.counties}
    units = []
    for j, county_id in enumerate(held):
        rec = records[county_id]
        unit = dict(unit_id=county_id, state_id=rec.state_id, fold=f, predicted_mean=float(mean[j]),
                    lower=float(lo[j]), upper=float(hi[j]))
        if rec.suppressed:
            units.append(CvUnit(**unit, observed=None, suppressed=True,
                                covered=bool(lo[j] <= ds.suppression_threshold),
                                p_below_threshold=float(p_below[j])))
        else:
            units.append(CvUnit(**unit, observed=float(rec.deaths),
                                covered=bool(lo[j] <= rec.deaths <= hi[j])))
    return units


def kfold_cv_deaths(
    ds: Dataset,
    mcfg: ModelConfig,
    scfg: SamplerConfig,
    k: int = 10,
    seed: int = 0,
    *,
    jobs: int = 1,
    warm_start: Optional[DrawSet] = None,
    interval: str = "predictive",
    level: float = 0.95,
) -> CvReport:
    """Stratified K-fold over all counties, scoring held-out death counts.

    Both the death term and any county prevalence estimate of a held-out
    county leave the likelihood. Counties with county estimates are spread
    evenly across folds.
    """
    _check_interval(interval)
    interval_percentiles(level)
    county_ids = [c.county_id for c in ds.counties]
    with_estimates = {e.county_id for e in ds.county_estimates}
    strata = [1 if c in with_estimates else 0 for c in county_ids]
    folds = assign_folds(len(county_ids), k, seed, strata)

    units: List[CvUnit] = []
    results: List[FoldResult] = []
    for f in range(k):
        held = [c for c, g in zip(county_ids, folds) if g == f]
        logger.info("death CV fold %d/%d: %d held-out counties", f + 1, k, len(held))
        drawset = fit(ds, mcfg, _fold_sampler(scfg, f, warm_start is not None),
                      holdout_deaths=held, holdout_estimates=[c for c in held if c in with_estimates],
                      jobs=jobs, warm_start=warm_start)
        results.append(_fold_result(f, len(held), drawset))
        units.extend(_death_units(drawset, ds, mcfg, held, f, seed, interval, level))

    report = _report("cv_deaths", units, results)
    good = {r.fold for r in results if r.converged}
    suppressed = [u for u in units if u.suppressed and u.fold in good]
    if suppressed:
        p_below = np.array([u.p_below_threshold for u in suppressed])
        report.extra.update({
            "suppressed_units": float(len(suppressed)),
            "suppressed_overlap": float(np.mean([u.covered for u in suppressed])),
            "suppressed_mean_p_below": float(p_below.mean()),
            "suppressed_share_p_above_level": float(np.mean(p_below >= SUPPRESSION_LEVEL)),
        })
    return report


def _evidence_states(ds: Dataset) -> Dict[str, List[str]]:
    state_of = {c.county_id: c.state_id for c in ds.counties}
    out: Dict[str, List[str]] = {}
    for est in ds.county_estimates:
        out.setdefault(state_of[est.county_id], []).append(est.county_id)
    return out


def leave_one_state_out(
    ds: Dataset,
    mcfg: ModelConfig,
    scfg: SamplerConfig,
    *,
    jobs: int = 1,
    warm_start: Optional[DrawSet] = None,
    level: float = 0.95,
) -> CvReport:
    """Hold out each evidence state's county estimates, refitting without the prevalence intercept."""
    percentiles = interval_percentiles(level)
    by_state = _evidence_states(ds)
    if len(by_state) < 2:
        raise ValidationError(
            f"leave-one-state-out needs at least two states with county estimates, found {len(by_state)}"
        )
    reduced = mcfg.reduced()
    observed = {e.county_id: e.prev_est for e in ds.county_estimates}

    units: List[CvUnit] = []
    results: List[FoldResult] = []
    per_state: Dict[str, Tuple[Optional[float], Optional[float]]] = {}
    for f, (state_id, held) in enumerate(by_state.items()):
        logger.info("leave-one-state-out: holding out %s (%d estimates)", state_id, len(held))
        drawset = fit(ds, reduced, _fold_sampler(scfg, f, warm_start is not None),
                      holdout_estimates=held, jobs=jobs, warm_start=warm_start)
        result = _fold_result(f, len(held), drawset)
        results.append(result)
        if not result.converged:
            logger.warning("leave-one-state-out refit for %s did not converge", state_id)

        rates = posterior_rates(drawset, ds, reduced)
        means = county_estimate_means(rates)
        rows = {rates.data.county_ids[i]: e for e, i in enumerate(rates.data.est_county)}
        cols = [rows[c] for c in held]
        mean = means[:, cols].mean(axis=0)
        lo, hi = np.percentile(means[:, cols], percentiles, axis=0)
        y = np.array([observed[c] for c in held])
        for j, county_id in enumerate(held):
            units.append(CvUnit(
                unit_id=county_id, state_id=state_id, fold=f, observed=float(y[j]),
                predicted_mean=float(mean[j]), lower=float(lo[j]), upper=float(hi[j]),
                covered=bool(lo[j] <= y[j] <= hi[j]),
            ))
        per_state[state_id] = (_correlation("spearman", mean, y), _correlation("pearson", mean, y))

    report = _report("loso", units, results)
    for state_id, (rho, r) in per_state.items():
        if rho is not None:
            report.extra[f"rank_correlation[{state_id}]"] = rho
        if r is not None:
            report.extra[f"linear_correlation[{state_id}]"] = r
    return report
