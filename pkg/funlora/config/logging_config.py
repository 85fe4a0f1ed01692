"""
Logging setup for the CLI and the runner scripts
"""
import logging
from typing import Optional

from funlora.config import settings

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def setup_logging(level: Optional[str] = None) -> None:
    """Install a single stream handler on the package logger"""
    logger = logging.getLogger("funlora")
    logger.setLevel((level or settings.LOG_LEVEL).upper())
    if not any(getattr(h, "_funlora", False) for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler._funlora = True
        logger.addHandler(handler)
