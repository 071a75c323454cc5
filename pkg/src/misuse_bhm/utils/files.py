"""
ABOUTME: Run-artifact writers and readers that stamp every file with config hash and seed
ABOUTME: CSVs carry a leading '# key=value,...' comment line; JSON documents carry a 'meta' object
"""

import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.17g"


def header_line(meta: Optional[Dict[str, Any]]) -> str:
    if not meta:
        return ""
    return "# " + ",".join(f"{k}={v}" for k, v in meta.items()) + "\n"


def write_csv(frame: pd.DataFrame, path: Path, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(header_line(meta))
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def header_rows(path: Path) -> int:
    """1 when the file opens with a metadata comment line, else 0."""
    with open(path, "r") as f:
        return 1 if f.readline().startswith("#") else 0


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, skiprows=header_rows(path))


def read_header(path: Path) -> Dict[str, str]:
    """Metadata from a CSV's leading comment line (empty if absent)."""
    with open(path, "r") as f:
        first = f.readline().strip()
    if not first.startswith("#"):
        return {}
    pairs = (item.split("=", 1) for item in first.lstrip("# ").split(",") if "=" in item)
    return {k.strip(): v.strip() for k, v in pairs}


def _default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_json(payload: Dict[str, Any], path: Path, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"meta": meta or {}, **payload}
    with open(path, "w") as f:
        json.dump(document, f, indent=2, sort_keys=False, default=_default, allow_nan=True)
        f.write("\n")
    return path


def read_json(path: Path) -> Dict[str, Any]:
    with open(path, "r") as f:
        return json.load(f)
