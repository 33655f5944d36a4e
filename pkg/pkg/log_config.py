#!/usr/bin/env python3
"""
Logging setup for command-line entry points.

Library modules only create named loggers; this is the one place that
configures handlers.

License: BSD 3-Clause
"""

import logging
import sys

from pythonjsonlogger import jsonlogger

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str = 'INFO', json_format: bool = False) -> None:
    """
    Configure the root logger.

    Args:
        level: Log level name
        json_format: Emit one JSON object per record instead of plain text
    """
    handler = logging.StreamHandler(sys.stderr)
    if json_format:
        handler.setFormatter(jsonlogger.JsonFormatter(LOG_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))

    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(getattr(logging, level.upper(), logging.INFO))
