"""
ABOUTME: Ingestion, validation and preparation of county, state-evidence and county-estimate tables
ABOUTME: Implements CI-to-SD conversion, state-mean imputation, standardization and lossless persistence
"""

import hashlib
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from .exceptions import (
    DataParseError,
    DegenerateCovariateError,
    DomainError,
    IntegrityError,
    UnusableCovariateError,
)
from .models import (
    CountyPrevEstimate,
    CountyRecord,
    Dataset,
    PrepConfig,
    SdMode,
    StateEvidence,
)
from .utils.files import header_rows, read_json, write_csv, write_json

logger = logging.getLogger(__name__)

CI_Z = 1.96

COUNTY_COLUMNS = ("county_id", "state_id", "population", "deaths", "suppressed")
STATE_COLUMNS = ("state_id", "prev_est", "ci_lower", "ci_upper", "q_misuse", "q_oud")
COUNTY_PREV_COLUMNS = ("county_id", "prev_est", "ci_lower", "ci_upper", "sd_mode", "sd_group")

_TRUE = {"1", "true", "yes", "t", "y"}
_FALSE = {"0", "false", "no", "f", "n", ""}

T = TypeVar("T")


def sd_from_ci(ci_lower: float, ci_upper: float) -> float:
    """Standard deviation implied by a symmetric 95% interval: width / (2 * 1.96)."""
    if not (np.isfinite(ci_lower) and np.isfinite(ci_upper)):
        raise DomainError("CI bounds must be finite")
    if ci_upper < ci_lower:
        raise DomainError(f"ci_upper ({ci_upper}) is below ci_lower ({ci_lower})")
    return (ci_upper - ci_lower) / (2.0 * CI_Z)


# Parsing helpers


def _read_table(path: Path, required: Sequence[str]) -> pd.DataFrame:
    if not path.exists():
        raise DataParseError("file not found", path=str(path))
    try:
        skip = header_rows(path)
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=skip, skip_blank_lines=False)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DataParseError(f"unreadable CSV: {e}", path=str(path))
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise DataParseError(f"missing columns {missing}", path=str(path), line=skip + 1)
    # blank rows are dropped but keep their place in the line count
    blank = (frame.isna() | (frame == "")).all(axis=1)
    frame = frame.loc[~blank].fillna("")
    frame.attrs["first_line"] = skip + 2
    return frame


def _opt_float(value: str) -> Optional[float]:
    value = value.strip()
    return None if value == "" else float(value)


def _opt_int(value: str) -> Optional[int]:
    value = value.strip()
    if value == "":
        return None
    number = float(value)
    if not number.is_integer():
        raise ValueError(f"expected an integer, got {value!r}")
    return int(number)


def _flag(value: str) -> bool:
    token = value.strip().lower()
    if token in _TRUE:
        return True
    if token in _FALSE:
        return False
    raise ValueError(f"expected a boolean flag, got {value!r}")


def _line_numbers(frame: pd.DataFrame) -> List[int]:
    """File line of each row: index position past the header, plus any metadata line."""
    first = frame.attrs.get("first_line", 2)
    return [int(i) + first for i in frame.index]


def _parse_rows(frame: pd.DataFrame, path: Path, build: Callable[[Dict[str, str]], T]) -> List[T]:
    records: List[T] = []
    for line, row in zip(_line_numbers(frame), frame.to_dict(orient="records")):
        try:
            records.append(build(row))
        except (ValueError, TypeError, PydanticValidationError) as e:
            raise DataParseError(str(e).splitlines()[0] if str(e) else repr(e), path=str(path), line=line)
    return records


def _county_builder(covariates: List[str]) -> Callable[[Dict[str, str]], CountyRecord]:
    def build(row: Dict[str, str]) -> CountyRecord:
        population = _opt_int(row["population"])
        if population is None:
            raise ValueError("population is required")
        return CountyRecord(
            county_id=row["county_id"].strip(),
            state_id=row["state_id"].strip(),
            population=population,
            deaths=_opt_int(row["deaths"]),
            suppressed=_flag(row["suppressed"]),
            covariates=tuple(_opt_float(row[name]) for name in covariates),
        )
    return build


def _state_builder(row: Dict[str, str]) -> StateEvidence:
    return StateEvidence(
        state_id=row["state_id"].strip(),
        prev_est=float(row["prev_est"]),
        ci_lower=float(row["ci_lower"]),
        ci_upper=float(row["ci_upper"]),
        q_misuse=_opt_int(row["q_misuse"]),
        q_oud=_opt_int(row["q_oud"]),
    )


def _county_prev_builder(row: Dict[str, str]) -> CountyPrevEstimate:
    mode = row["sd_mode"].strip().lower() or SdMode.FROM_CI.value
    group = row["sd_group"].strip() or None
    return CountyPrevEstimate(
        county_id=row["county_id"].strip(),
        prev_est=float(row["prev_est"]),
        ci_lower=_opt_float(row["ci_lower"]),
        ci_upper=_opt_float(row["ci_upper"]),
        sd_mode=SdMode(mode),
        sd_group=group,
    )


def check_integrity(ds: Dataset) -> None:
    """Uniqueness and referential integrity across the three tables."""
    seen: Dict[str, int] = {}
    for i, county in enumerate(ds.counties):
        if county.county_id in seen:
            raise IntegrityError(f"duplicate county_id '{county.county_id}'")
        seen[county.county_id] = i
        if len(county.covariates) != len(ds.covariate_names):
            raise IntegrityError(
                f"county '{county.county_id}' has {len(county.covariates)} covariates, "
                f"expected {len(ds.covariate_names)}"
            )

    states = set(ds.state_ids)
    evidenced = set()
    for ev in ds.state_evidence:
        if ev.state_id not in states:
            raise IntegrityError(f"state evidence references unknown state_id '{ev.state_id}'")
        if ev.state_id in evidenced:
            raise IntegrityError(f"duplicate state evidence for '{ev.state_id}'")
        evidenced.add(ev.state_id)

    estimated = set()
    for est in ds.county_estimates:
        if est.county_id not in seen:
            raise IntegrityError(f"county estimate references unknown county_id '{est.county_id}'")
        if est.county_id in estimated:
            raise IntegrityError(f"duplicate county estimate for '{est.county_id}'")
        estimated.add(est.county_id)


def load_dataset(
    county_path: Path,
    state_path: Optional[Path],
    county_prev_path: Optional[Path],
    config: Optional[PrepConfig] = None,
) -> Dataset:
    """Load and validate the raw input tables."""
    config = config or PrepConfig()
    county_path = Path(county_path)

    counties_frame = _read_table(county_path, COUNTY_COLUMNS)
    covariates = [c for c in counties_frame.columns if c not in COUNTY_COLUMNS]
    if config.covariates is not None:
        unknown = [c for c in config.covariates if c not in covariates]
        if unknown:
            header = counties_frame.attrs["first_line"] - 1
            raise DataParseError(f"covariates {unknown} not present", path=str(county_path), line=header)
        covariates = list(config.covariates)
    counties = _parse_rows(counties_frame, county_path, _county_builder(covariates))

    state_evidence: List[StateEvidence] = []
    if state_path is not None:
        state_path = Path(state_path)
        state_evidence = _parse_rows(_read_table(state_path, STATE_COLUMNS), state_path, _state_builder)

    county_estimates: List[CountyPrevEstimate] = []
    if county_prev_path is not None:
        county_prev_path = Path(county_prev_path)
        county_estimates = _parse_rows(
            _read_table(county_prev_path, COUNTY_PREV_COLUMNS), county_prev_path, _county_prev_builder
        )

    ds = Dataset(
        counties=tuple(counties),
        state_evidence=tuple(state_evidence),
        county_estimates=tuple(county_estimates),
        covariate_names=tuple(covariates),
        suppression_threshold=config.suppression_threshold,
    )
    check_integrity(ds)
    logger.info(
        "Loaded %d counties in %d states, %d state evidence rows, %d county estimates",
        len(ds.counties), len(ds.state_ids), len(ds.state_evidence), len(ds.county_estimates),
    )
    return ds


def _with_covariates(ds: Dataset, matrix: np.ndarray, **updates: Any) -> Dataset:
    counties = tuple(
        county.model_copy(update={
            "covariates": tuple(None if np.isnan(v) else float(v) for v in row)
        })
        for county, row in zip(ds.counties, matrix)
    )
    return ds.model_copy(update={"counties": counties, **updates})


def impute_missing(ds: Dataset) -> Dataset:
    """Replace missing covariates with the state mean, falling back to the national mean."""
    matrix = ds.covariate_matrix()
    missing = np.isnan(matrix)
    if not missing.any():
        return ds

    states = np.array([c.state_id for c in ds.counties])
    filled = matrix.copy()
    for j, name in enumerate(ds.covariate_names):
        column = matrix[:, j]
        if not missing[:, j].any():
            continue
        if missing[:, j].all():
            raise UnusableCovariateError(name)
        national = float(np.mean(column[~missing[:, j]]))
        state_means = pd.Series(column).groupby(states).mean()
        for i in np.flatnonzero(missing[:, j]):
            value = state_means[states[i]]
            if np.isnan(value):
                logger.warning(
                    "Covariate '%s' missing in every county of state '%s'; using national mean %.6g",
                    name, states[i], national,
                )
                value = national
            filled[i, j] = value

    count = int(missing.sum())
    logger.info("Imputed %d missing covariate values", count)
    return _with_covariates(ds, filled, imputed_count=ds.imputed_count + count)


def standardize_covariates(ds: Dataset) -> Dataset:
    """Center and scale every covariate column (unweighted, n-1 denominator)."""
    matrix = ds.covariate_matrix()
    if np.isnan(matrix).any():
        raise DomainError("covariates contain missing values; impute before standardizing")

    standardized = np.empty_like(matrix)
    standardization: Dict[str, Tuple[float, float]] = {}
    for j, name in enumerate(ds.covariate_names):
        column = matrix[:, j]
        mean = float(np.mean(column))
        sd = float(np.std(column, ddof=1)) if column.size > 1 else 0.0
        if not np.isfinite(sd) or sd == 0.0:
            raise DegenerateCovariateError(name)
        standardized[:, j] = (column - mean) / sd
        # compose with any earlier pass so (mean, sd) always refer to raw values
        prior_mean, prior_sd = ds.standardization.get(name, (0.0, 1.0))
        standardization[name] = (prior_mean + prior_sd * mean, prior_sd * sd)

    return _with_covariates(ds, standardized, standardization=standardization)


def apply_standardization(values: np.ndarray, ds: Dataset) -> np.ndarray:
    """Apply the stored (mean, sd) pairs to raw covariate rows."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    means = np.array([ds.standardization[n][0] for n in ds.covariate_names])
    sds = np.array([ds.standardization[n][1] for n in ds.covariate_names])
    return (values - means) / sds


def prepare_dataset(ds: Dataset, config: Optional[PrepConfig] = None) -> Dataset:
    """Imputation (when enabled) followed by standardization."""
    config = config or PrepConfig()
    if config.impute_missing:
        ds = impute_missing(ds)
    if ds.covariate_names:
        ds = standardize_covariates(ds)
    return ds.model_copy(update={"suppression_threshold": config.suppression_threshold})


# Persistence


def _fmt(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, SdMode):
        return value.value
    return str(value)


def _write_rows(
    path: Path, header: Sequence[str], rows: List[List[Any]], meta: Optional[Dict[str, Any]] = None
) -> None:
    frame = pd.DataFrame([[_fmt(v) for v in row] for row in rows], columns=list(header), dtype=object)
    write_csv(frame, path, meta)


def write_dataset(ds: Dataset, directory: Path, meta: Optional[Dict[str, Any]] = None) -> Dict[str, Path]:
    """Persist a dataset so that reloading reproduces it exactly.

    ``meta`` (config hash and seed of the run) is stamped on every file.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {
        "counties": directory / "counties.csv",
        "state_evidence": directory / "state_evidence.csv",
        "county_prev": directory / "county_prev.csv",
        "meta": directory / "dataset.json",
    }
    _write_rows(
        paths["counties"],
        list(COUNTY_COLUMNS) + list(ds.covariate_names),
        [
            [c.county_id, c.state_id, c.population, c.deaths, c.suppressed, *c.covariates]
            for c in ds.counties
        ],
        meta,
    )
    _write_rows(
        paths["state_evidence"],
        STATE_COLUMNS,
        [[e.state_id, e.prev_est, e.ci_lower, e.ci_upper, e.q_misuse, e.q_oud] for e in ds.state_evidence],
        meta,
    )
    _write_rows(
        paths["county_prev"],
        COUNTY_PREV_COLUMNS,
        [[e.county_id, e.prev_est, e.ci_lower, e.ci_upper, e.sd_mode, e.sd_group] for e in ds.county_estimates],
        meta,
    )
    payload = {
        "covariate_names": list(ds.covariate_names),
        "standardization": {k: list(v) for k, v in ds.standardization.items()},
        "suppression_threshold": ds.suppression_threshold,
        "imputed_count": ds.imputed_count,
        "dataset_hash": dataset_hash(ds),
    }
    write_json(payload, paths["meta"], meta)
    return paths


def load_prepared(directory: Path) -> Dataset:
    """Reload a dataset written by :func:`write_dataset`."""
    directory = Path(directory)
    meta_path = directory / "dataset.json"
    if not meta_path.exists():
        raise DataParseError("prepared dataset metadata not found", path=str(meta_path))
    meta = read_json(meta_path)
    ds = load_dataset(
        directory / "counties.csv",
        directory / "state_evidence.csv",
        directory / "county_prev.csv",
        PrepConfig(
            suppression_threshold=meta["suppression_threshold"],
            covariates=meta["covariate_names"],
        ),
    )
    return ds.model_copy(update={
        "standardization": {k: (float(v[0]), float(v[1])) for k, v in meta["standardization"].items()},
        "imputed_count": meta.get("imputed_count", 0),
    })


def dataset_hash(ds: Dataset) -> str:
    """Content hash used to guard stored draws against stale inputs."""
    return hashlib.sha256(ds.model_dump_json().encode()).hexdigest()[:16]


def load_state_totals(path: Path) -> Dict[str, int]:
    """Observed (unsuppressed) state death totals for predictive checks."""
    path = Path(path)
    frame = _read_table(path, ("state_id", "observed_deaths"))
    totals: Dict[str, int] = {}
    for line, row in zip(_line_numbers(frame), frame.to_dict(orient="records")):
        try:
            value = _opt_int(row["observed_deaths"])
        except ValueError as e:
            raise DataParseError(str(e), path=str(path), line=line)
        if value is not None:
            totals[row["state_id"].strip()] = value
    return totals


def load_external_estimates(path: Path) -> pd.DataFrame:
    """External county estimates: ``county_id,estimate,ci_lower,ci_upper``."""
    path = Path(path)
    frame = _read_table(path, ("county_id", "estimate"))
    out = pd.DataFrame({"county_id": frame["county_id"].str.strip()})
    for column in ("estimate", "ci_lower", "ci_upper"):
        if column in frame.columns:
            out[column] = pd.to_numeric(frame[column].replace("", np.nan), errors="coerce")
        else:
            out[column] = np.nan
    if out["estimate"].isna().any():
        bad = int(np.flatnonzero(out["estimate"].isna().to_numpy())[0])
        raise DataParseError("estimate is required", path=str(path), line=_line_numbers(frame)[bad])
    return out
