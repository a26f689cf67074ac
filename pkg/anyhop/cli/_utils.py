"""Helper functions for the CLI.

This module provides utility functions for consistent table displays and for
routing library log records to the terminal.
"""

import logging

from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table


def create_table(
    key_title: str = "", value_title: str = "", show_header: bool = True
) -> Table:
    """Create a two-column key-value table.

    Parameters
    ----------
    key_title : str, default=""
        Title for the key column
    value_title : str, default=""
        Title for the value column
    show_header : bool, default=True
        Whether to display column headers

    Returns
    -------
    Table
        Rich Table with bold magenta headers and a dim key column
    """
    table = Table(show_header=show_header, header_style="bold magenta")
    table.add_column(key_title, style="dim")
    table.add_column(value_title)
    return table


def setup_logging(verbose: bool = False) -> None:
    """Attach a rich handler writing to stderr to the ``anyhop`` logger.

    Parameters
    ----------
    verbose : bool, default=False
        Log at INFO instead of WARNING
    """
    logger = logging.getLogger("anyhop")
    logger.setLevel(logging.INFO if verbose else logging.WARNING)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(console=Console(stderr=True), show_path=False)
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
