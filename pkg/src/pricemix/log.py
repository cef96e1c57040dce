"""Logging setup for the command line."""

from __future__ import annotations

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def configure_logging(verbosity: int = 0) -> None:
    """Route pricemix logs through a rich handler on stderr.

    Args:
        verbosity: 0 for warnings, 1 for info, 2 or more for debug.
            PRICEMIX_LOG_LEVEL overrides it when set.
    """
    level = LEVELS[min(max(verbosity, 0), len(LEVELS) - 1)]
    override = os.environ.get("PRICEMIX_LOG_LEVEL")
    if override:
        level = logging.getLevelName(override.upper())
        if not isinstance(level, int):
            level = logging.WARNING

    handler = RichHandler(
        console=Console(stderr=True),
        show_time=False,
        show_path=False,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))

    root = logging.getLogger("pricemix")
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(level)
    root.propagate = False
