"""
ABOUTME: Console output and logging setup for rich terminal display
ABOUTME: Provides consistent styling for success, error, warning, and info messages
"""

import json
import logging
from typing import Any, Dict, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

console = Console()
err_console = Console(stderr=True)


def success(message: str) -> None:
    """Display a success message."""
    console.print(f"✓ {message}", style="bold green")


def error(message: str) -> None:
    """Display an error message."""
    err_console.print(f"✗ {message}", style="bold red")


def warning(message: str) -> None:
    """Display a warning message."""
    console.print(f"⚠ {message}", style="bold yellow")


def info(message: str) -> None:
    """Display an info message."""
    console.print(f"ℹ {message}", style="bold blue")


def setup_logging(verbose: bool = False) -> None:
    """Route library logging through rich; INFO when verbose, WARNING otherwise."""
    root = logging.getLogger("misuse_bhm")
    root.handlers.clear()
    handler = RichHandler(console=err_console, show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
    root.setLevel(logging.INFO if verbose else logging.WARNING)
    root.propagate = False


def _jsonable(value: Any) -> str:
    return json.dumps(value, indent=2, default=str)


def print_json(data: Any) -> None:
    """Print data as formatted JSON."""
    console.print(_jsonable(data))


def format_dict_output(data: Dict[str, Any], title: Optional[str] = None) -> None:
    """Two-column key/value table; nested values rendered as JSON."""
    table = Table(show_header=False, box=None, padding=(0, 1))
    table.add_column("Key", style="bold cyan", min_width=15)
    table.add_column("Value", style="white")
    for key, value in data.items():
        if isinstance(value, (dict, list)):
            value = _jsonable(value)
        elif isinstance(value, float):
            value = f"{value:.4g}"
        table.add_row(str(key), str(value))
    if title:
        console.print(Panel(table, title=title, border_style="blue"))
    else:
        console.print(table)


def handle_output(data: Any, json_output: bool = False, success_message: Optional[str] = None) -> None:
    """Print a command result as JSON or as a readable table."""
    if json_output:
        print_json(data)
        return
    if success_message:
        success(success_message)
    if isinstance(data, dict):
        format_dict_output(data)
    elif isinstance(data, list):
        if not data:
            console.print("No items found.", style="yellow")
        for i, item in enumerate(data, 1):
            console.print(f"[bold cyan]{i}.[/bold cyan] {item}")
    elif data is not None:
        console.print(str(data))
