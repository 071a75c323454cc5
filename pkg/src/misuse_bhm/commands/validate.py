"""
ABOUTME: Validate command: residual analyses, predictive checks, cross-validation, LOSO,
ABOUTME: prior sensitivity, the residual ladder, parameter recovery and external comparison
"""

import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import pandas as pd

from ..data import load_external_estimates, load_state_totals
from ..exceptions import ConfigurationError, MisuseBHMError
from ..inference import DrawSet, RHAT_GATE
from ..models import CvReport, Dataset, RunConfig
from ..predict import prediction_table
from ..utils.files import read_csv, write_csv, write_json
from ..validate import (
    compare_external,
    kfold_cv_deaths,
    kfold_cv_prevalence,
    leave_one_state_out,
    parameter_recovery,
    pearson_residuals,
    ppc_state_deaths,
    prevalence_residuals,
    prior_sensitivity,
    regression_counts,
    residual_ladder,
    residual_regression,
    select_variants,
    state_residual_summary,
)
from .fit import load_run
from .paths import RunPaths, run_meta
from .prepare import run_dataset

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("residuals", "ppc", "cv-prev", "cv-deaths", "loso", "sensitivity", "ladder", "external", "recovery")


class _Context:
    """Lazily loaded dataset and stored draws for one validate invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.paths = RunPaths.of(cfg)
        self.meta = run_meta(cfg)
        self._ds: Optional[Dataset] = None

    @property
    def ds(self) -> Dataset:
        if self._ds is None:
            self._ds = run_dataset(self.cfg)
        return self._ds

    def draws(self) -> DrawSet:
        return load_run(self.cfg, self.ds)

    def warm_start(self) -> Optional[DrawSet]:
        try:
            return self.draws()
        except MisuseBHMError:
            logger.info("no usable stored fit; refits start without warm start")
            return None

    def write(self, name: str, frame: pd.DataFrame) -> Path:
        return write_csv(frame, self.paths.validate / f"{name}.csv", self.meta)

    def write_json(self, name: str, payload: Dict[str, Any]) -> Path:
        return write_json(payload, self.paths.validate / f"{name}.json", self.meta)


def _stored_converged(drawset: DrawSet) -> bool:
    return bool(drawset.metadata.get("convergence", {}).get("passed", False))


def _residuals(ctx: _Context) -> Dict[str, Any]:
    drawset = ctx.draws()
    residuals = pearson_residuals(drawset, ctx.ds, ctx.cfg.model)
    states = state_residual_summary(residuals)
    regression = residual_regression(residuals, ctx.ds)
    counts = regression_counts(regression)
    paths = {
        "residuals": ctx.write("residuals", residuals),
        "states": ctx.write("residual_states", states),
        "regression": ctx.write("residual_regression", regression),
        "regression_counts": ctx.write("residual_regression_counts", counts),
        "prevalence": ctx.write("prevalence_residuals", prevalence_residuals(drawset, ctx.ds, ctx.cfg.model)),
    }
    return {
        "converged": _stored_converged(drawset),
        "states_tested": int(len(states)),
        "states_significant": int(states["significant"].sum()) if len(states) else 0,
        "regression_counts": counts.to_dict(orient="records"),
        "paths": paths,
    }


def _ppc(ctx: _Context) -> Dict[str, Any]:
    if not ctx.cfg.inputs.state_totals:
        raise ConfigurationError("inputs.state_totals is required for the predictive check")
    drawset = ctx.draws()
    table = ppc_state_deaths(drawset, ctx.ds, load_state_totals(Path(ctx.cfg.inputs.state_totals)),
                             seed=ctx.cfg.sampler.seed)
    checked = table[~table["skipped"]]
    return {
        "converged": _stored_converged(drawset),
        "states_checked": int(len(checked)),
        "states_flagged": int(checked["extreme"].sum()),
        "states_skipped": int(table["skipped"].sum()),
        "paths": {"ppc": ctx.write("ppc", table)},
    }


def _cv_output(ctx: _Context, name: str, report: CvReport) -> Dict[str, Any]:
    units = pd.DataFrame([u.model_dump() for u in report.units])
    folds = pd.DataFrame([f.model_dump() for f in report.folds])
    paths = {
        "units": ctx.write(name, units),
        "folds": ctx.write(f"{name}_folds", folds),
        "report": ctx.write_json(name, {"report": report.model_dump(mode="json", exclude={"units"})}),
    }
    return {
        "converged": all(f.converged for f in report.folds),
        "folds": len(report.folds),
        "units": len(report.units),
        "mape": report.mape,
        "coverage": report.coverage,
        "rank_correlation": report.rank_correlation,
        "linear_correlation": report.linear_correlation,
        **report.extra,
        "paths": paths,
    }


def _cv_prev(ctx: _Context) -> Dict[str, Any]:
    opts = ctx.cfg.validate_options
    report = kfold_cv_prevalence(
        ctx.ds, ctx.cfg.model, ctx.cfg.sampler, opts.k, ctx.cfg.sampler.seed,
        jobs=ctx.cfg.jobs, warm_start=ctx.warm_start(), interval=opts.interval, level=opts.level,
    )
    return _cv_output(ctx, "cv_prevalence", report)


def _cv_deaths(ctx: _Context) -> Dict[str, Any]:
    opts = ctx.cfg.validate_options
    report = kfold_cv_deaths(
        ctx.ds, ctx.cfg.model, ctx.cfg.sampler, opts.k, ctx.cfg.sampler.seed,
        jobs=ctx.cfg.jobs, warm_start=ctx.warm_start(), interval=opts.interval, level=opts.level,
    )
    return _cv_output(ctx, "cv_deaths", report)


def _loso(ctx: _Context) -> Dict[str, Any]:
    report = leave_one_state_out(
        ctx.ds, ctx.cfg.model, ctx.cfg.sampler, jobs=ctx.cfg.jobs, level=ctx.cfg.validate_options.level
    )
    return _cv_output(ctx, "loso", report)


def _sensitivity(ctx: _Context) -> Dict[str, Any]:
    variants = select_variants(ctx.cfg.model, ctx.cfg.validate_options.variants)
    report = prior_sensitivity(ctx.ds, ctx.cfg.model, ctx.cfg.sampler, variants, jobs=ctx.cfg.jobs)
    paths = {
        "table": ctx.write("sensitivity", report.table),
        "report": ctx.write_json("sensitivity", {"converged": report.converged, "max_rhat": report.max_rhat,
                                                 "max_shift_sd": report.max_shift}),
    }
    return {
        "converged": all(report.converged.values()),
        "variants": list(variants),
        "max_shift_sd": report.max_shift,
        "paths": paths,
    }


def _ladder(ctx: _Context) -> Dict[str, Any]:
    table = residual_ladder(ctx.ds, ctx.cfg.sampler, ctx.cfg.model, jobs=ctx.cfg.jobs)
    return {
        "converged": bool(table["converged"].all()),
        "share_significant": dict(zip(table["step"], table["share_significant"])),
        "paths": {"ladder": ctx.write("ladder", table)},
    }


def _external(ctx: _Context) -> Dict[str, Any]:
    if not ctx.cfg.inputs.external:
        raise ConfigurationError("inputs.external is required for the external comparison")
    drawset = ctx.draws()
    if ctx.paths.predictions.exists():
        predictions = read_csv(ctx.paths.predictions)
    else:
        predictions = prediction_table(drawset, ctx.ds, ctx.cfg.sampler.seed)
    result = compare_external(predictions, load_external_estimates(Path(ctx.cfg.inputs.external)))
    path = ctx.write_json("external", {"comparison": result})
    return {"converged": _stored_converged(drawset), **result, "paths": {"external": path}}


def _recovery(ctx: _Context, replicates: int = 10) -> Dict[str, Any]:
    report = parameter_recovery(ctx.cfg.synthetic, ctx.cfg.model, ctx.cfg.sampler, replicates, jobs=ctx.cfg.jobs)
    return {
        "converged": bool(report.max_rhat < RHAT_GATE),
        "replicates": replicates,
        "coverage": report.coverage,
        "max_rhat": report.max_rhat,
        "paths": {"recovery": ctx.write("recovery", report.table)},
    }


_HANDLERS: Dict[str, Callable[..., Dict[str, Any]]] = {
    "residuals": _residuals,
    "ppc": _ppc,
    "cv-prev": _cv_prev,
    "cv-deaths": _cv_deaths,
    "loso": _loso,
    "sensitivity": _sensitivity,
    "ladder": _ladder,
    "external": _external,
    "recovery": _recovery,
}


def validate_run(cfg: RunConfig, subcommand: str, **options: Any) -> Dict[str, Any]:
    """
    Run one validation analysis and write its report under ``<out>/validate``.

    Args:
        cfg: Resolved run configuration
        subcommand: One of SUBCOMMANDS
        options: Extra keyword options for the analysis (``replicates`` for recovery)

    Returns:
        Summary dict with a ``converged`` flag and the paths written
    """
    if subcommand not in _HANDLERS:
        raise ConfigurationError(f"unknown validate subcommand {subcommand!r}")
    result = _HANDLERS[subcommand](_Context(cfg), **options)
    result["paths"] = {k: str(v) for k, v in result["paths"].items()}
    return result
