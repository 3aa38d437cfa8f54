import logging
import sys
from typing import Optional

import structlog

from skyfair.core.config import settings
from skyfair.core.errors import ConfigurationError

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def configure_logging(
    level: Optional[str] = None,
    fmt: Optional[str] = None,
    renderer: Optional[str] = None,
) -> None:
    """Route structlog through stdlib logging on stderr; stdout stays reserved for results"""
    level_name = (level or settings.LOG_LEVEL).upper()
    if level_name not in LEVELS:
        raise ConfigurationError(f"unknown level {level_name}", field="log_level")
    logging.basicConfig(
        level=getattr(logging, level_name),
        format=fmt or settings.LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
    final = (
        structlog.processors.JSONRenderer()
        if (renderer or settings.LOG_RENDERER) == "json"
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            final,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
