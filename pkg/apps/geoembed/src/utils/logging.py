import logging
import os
import sys
from typing import Optional

LOGGING_CONFIG = {
    "level": os.getenv("GEOEMBED_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s %(levelname)s %(name)s: %(message)s",
}


def configure_logging(level: Optional[str] = None) -> None:
    """Root logger to stderr; stdout stays free for command output."""
    logging.basicConfig(
        level=(level or LOGGING_CONFIG["level"]).upper(),
        format=LOGGING_CONFIG["format"],
        stream=sys.stderr,
        force=True,
    )
