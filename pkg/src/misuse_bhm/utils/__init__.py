"""
ABOUTME: Utility module initialization for console output, table formatting and run artifacts
"""

from .files import read_csv, read_header, read_json, write_csv, write_json
from .format import format_table, format_value, frame_table, markdown_table
from .output import error, handle_output, info, print_json, setup_logging, success, warning

__all__ = [
    "error",
    "format_table",
    "format_value",
    "frame_table",
    "handle_output",
    "info",
    "markdown_table",
    "print_json",
    "read_csv",
    "read_header",
    "read_json",
    "setup_logging",
    "success",
    "warning",
    "write_csv",
    "write_json",
]
