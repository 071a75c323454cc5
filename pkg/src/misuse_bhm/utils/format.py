"""
ABOUTME: Table formatting for posterior summaries, predictions and validation reports
ABOUTME: Rich tables for the terminal and tabulate markdown for report files
"""

from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from rich.table import Table
from tabulate import tabulate


def format_value(value: Any, digits: int = 4) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        if np.isnan(value):
            return "-"
        return f"{value:.{digits}g}"
    return str(value)


def format_table(data: List[Dict[str, Any]], columns: List[str], title: Optional[str] = None) -> Table:
    """Create a formatted table from data."""
    table = Table(title=title)
    for column in columns:
        table.add_column(column, style="cyan" if column == columns[0] else None,
                         justify="left" if column == columns[0] else "right")
    for row in data:
        table.add_row(*(format_value(row.get(col)) for col in columns))
    return table


def frame_table(frame: pd.DataFrame, title: Optional[str] = None, max_rows: Optional[int] = None,
                columns: Optional[List[str]] = None) -> Table:
    """Rich table of a DataFrame, optionally truncated."""
    columns = columns or list(frame.columns)
    rows = frame[columns].to_dict(orient="records")
    if max_rows is not None and len(rows) > max_rows:
        rows = rows[:max_rows]
        title = f"{title or ''} (first {max_rows} of {len(frame)})".strip()
    return format_table(rows, columns, title)


def markdown_table(frame: pd.DataFrame, columns: Optional[List[str]] = None, floatfmt: str = ".4g") -> str:
    """GitHub-flavoured markdown table for report files."""
    columns = columns or list(frame.columns)
    return tabulate(frame[columns], headers="keys", tablefmt="github", showindex=False,
                    floatfmt=floatfmt, missingval="-")
