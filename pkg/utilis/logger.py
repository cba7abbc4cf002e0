import logging
import os
from datetime import datetime

from dotenv import load_dotenv

load_dotenv()

# Log directory can be moved with SPINBUS_LOG_DIR
LOG_DIR = os.getenv("SPINBUS_LOG_DIR", "reports/logs")
LOG_FILE = os.path.join(LOG_DIR, f"spinbus_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log")

_LEVELS = {"DEBUG": logging.DEBUG, "INFO": logging.INFO, "WARNING": logging.WARNING, "ERROR": logging.ERROR}


def _default_level():
    return _LEVELS.get(os.getenv("SPINBUS_LOG_LEVEL", "INFO").upper(), logging.INFO)


def get_logger(name=__name__):
    """Setup and return a logger instance (file + console)."""
    logger = logging.getLogger(name)
    logger.setLevel(_default_level())

    if not logger.handlers:
        os.makedirs(LOG_DIR, exist_ok=True)

        # File Handler
        file_handler = logging.FileHandler(LOG_FILE)
        file_format = logging.Formatter("%(asctime)s - %(levelname)s - %(message)s")
        file_handler.setFormatter(file_format)

        # Console Handler
        console_handler = logging.StreamHandler()
        console_format = logging.Formatter("%(message)s")
        console_handler.setFormatter(console_format)

        logger.addHandler(file_handler)
        logger.addHandler(console_handler)

        logger.propagate = False  # Prevent duplicate logs

    return logger


def set_level(level):
    """Switch every spinbus/utilis logger (and future ones) to `level`."""
    os.environ["SPINBUS_LOG_LEVEL"] = logging.getLevelName(level)
    for name, existing in logging.root.manager.loggerDict.items():
        if isinstance(existing, logging.Logger) and name.split(".")[0] in {"spinbus", "utilis"}:
            existing.setLevel(level)
