"""structlog configuration.

Logs go to stderr so stdout stays free for CLI reports.
"""

import logging
import os
import sys
from typing import Optional

import structlog

_LEVEL_ENV = "RIS_NOMA_LOG_LEVEL"


def configure_logging(level: Optional[str] = None, *, json_output: bool = False) -> None:
    """Route structlog through stdlib logging on stderr.

    Args:
        level: Level name; falls back to ``RIS_NOMA_LOG_LEVEL`` and then ``INFO``
        json_output: Render events as JSON lines instead of key=value text
    """
    level_name = (level or os.getenv(_LEVEL_ENV) or "INFO").upper()
    numeric_level = logging.getLevelName(level_name)
    if not isinstance(numeric_level, int):
        numeric_level = logging.INFO

    logging.basicConfig(
        level=numeric_level,
        format="%(message)s",
        stream=sys.stderr,
        force=True,
    )

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if json_output
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
