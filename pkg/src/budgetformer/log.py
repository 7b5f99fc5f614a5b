"""Console logging through rich."""

from __future__ import annotations

import logging
import os

from rich.console import Console
from rich.logging import RichHandler

LOG_LEVEL_ENV = "BUDGETFORMER_LOG_LEVEL"
DEFAULT_LOG_LEVEL = "INFO"


def resolve_level(level: str | None = None) -> int:
    """Explicit level, else $BUDGETFORMER_LOG_LEVEL, else INFO; unknown names mean INFO."""
    name = (level or os.environ.get(LOG_LEVEL_ENV, DEFAULT_LOG_LEVEL)).upper()
    value = logging.getLevelName(name)
    return value if isinstance(value, int) else logging.INFO


def configure_logging(level: str | None = None, console: Console | None = None) -> None:
    """Install a single RichHandler on the root logger."""
    root = logging.getLogger()
    root.setLevel(resolve_level(level))
    if any(isinstance(handler, RichHandler) for handler in root.handlers):
        return
    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=False,
        show_time=False,
        rich_tracebacks=True,
    )
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
