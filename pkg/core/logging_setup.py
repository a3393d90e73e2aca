"""
Logging configuration driven by the application settings.
"""

import logging
import sys
from typing import Optional

from core.config import settings

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """Install a single stderr handler using LOG_LEVEL and LOG_FORMAT; DEBUG=true lowers the default to DEBUG."""
    global _configured
    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
        root.addHandler(handler)
        _configured = True
    level = level or ("DEBUG" if settings.DEBUG else settings.LOG_LEVEL)
    root.setLevel(level.upper())
