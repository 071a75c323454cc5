"""
ABOUTME: Report command: collect a run's summary, aggregates and validation artifacts
ABOUTME: into tables for the terminal and a markdown report file
"""

from pathlib import Path
from typing import Dict, List, Optional, Tuple

import pandas as pd

from ..exceptions import RunError
from ..models import RunConfig
from ..utils.files import read_csv, read_json
from ..utils.format import markdown_table
from .paths import RunPaths

SUMMARY_COLUMNS = ["param", "mean", "p2.5", "p97.5", "rhat", "ess", "significant"]

# (file stem, title, columns or None for all)
_VALIDATE_SECTIONS: List[Tuple[str, str, Optional[List[str]]]] = [
    ("residual_states", "State mean Pearson residuals", None),
    ("residual_regression_counts", "Residual regressions: significant states per covariate", None),
    ("ppc", "Predictive check of state death totals",
     ["state_id", "observed", "pred_mean", "pred_p2.5", "pred_p97.5", "percentile", "extreme"]),
    ("cv_prevalence_folds", "Prevalence cross-validation folds", None),
    ("cv_deaths_folds", "Death cross-validation folds", None),
    ("loso_folds", "Leave-one-state-out refits", None),
    ("ladder", "Residual ladder", None),
    ("recovery", "Parameter recovery", None),
]

_CV_REPORTS = ("cv_prevalence", "cv_deaths", "loso")


def _cv_metrics(directory: Path) -> pd.DataFrame:
    rows = []
    for name in _CV_REPORTS:
        path = directory / f"{name}.json"
        if not path.exists():
            continue
        report = read_json(path)["report"]
        rows.append({
            "analysis": name,
            "mape": report.get("mape"),
            "coverage": report.get("coverage"),
            "rank_correlation": report.get("rank_correlation"),
            "linear_correlation": report.get("linear_correlation"),
        })
    return pd.DataFrame(rows)


def collect_report(cfg: RunConfig) -> Dict[str, pd.DataFrame]:
    """
    Gather every available artifact of a run as titled tables.

    Args:
        cfg: Resolved run configuration

    Returns:
        Ordered mapping from section title to table; writes ``report.md``
    """
    paths = RunPaths.of(cfg)
    if not paths.summary.exists():
        raise RunError(f"no fitted run found in {paths.root}; run fit first")

    sections: Dict[str, pd.DataFrame] = {}
    summary = read_csv(paths.summary)
    sections["Posterior summary"] = summary[[c for c in SUMMARY_COLUMNS if c in summary.columns]]
    if paths.aggregates.exists():
        aggregates = read_csv(paths.aggregates)
        sections["Prevalence by state and nation"] = aggregates[
            ["level", "id", "prev_mean", "prev_p2.5", "prev_p97.5", "count_mean"]
        ]
    cv = _cv_metrics(paths.validate)
    if not cv.empty:
        sections["Cross-validation"] = cv
    for stem, title, columns in _VALIDATE_SECTIONS:
        path = paths.validate / f"{stem}.csv"
        if path.exists():
            frame = read_csv(path)
            sections[title] = frame[columns] if columns else frame

    lines = [f"# Run report: {paths.root}", ""]
    if paths.convergence.exists():
        conv = read_json(paths.convergence)["convergence"]
        lines += [
            f"Convergence gate {'passed' if conv['passed'] else 'NOT passed'}: "
            f"max R-hat {conv['max_rhat']} ({conv['max_rhat_param']}), "
            f"{conv['divergences']} divergences, {conv['max_depth_saturations']} tree-depth saturations.",
            "",
        ]
    for title, frame in sections.items():
        lines += [f"## {title}", "", markdown_table(frame), ""]
    paths.report.write_text("\n".join(lines))
    return sections
