import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def configure_logging(level: Optional[str] = None) -> int:
    """
    Route all log records to stderr once per process.
    The level comes from the argument, else SHAPECX_LOG_LEVEL, else INFO.
    """
    load_dotenv()
    name = (level or os.environ.get("SHAPECX_LOG_LEVEL") or "INFO").upper()
    if name not in LOG_LEVELS:
        raise ValueError(f"unknown log level '{name}', expected one of {', '.join(LOG_LEVELS)}")
    numeric = getattr(logging, name)

    root = logging.getLogger()
    for handler in list(root.handlers):
        if getattr(handler, "_shapecx", False):
            root.removeHandler(handler)
    # stderr is looked up at call time so click's test runner can capture it
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._shapecx = True
    root.addHandler(handler)
    root.setLevel(numeric)
    return numeric
