from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from tqdm import tqdm


LOGGER_NAME = "ginibre_lab"
LOG_FORMAT = "%(asctime)s | %(levelname)s | %(message)s"


class TqdmHandler(logging.StreamHandler):
    """Writes records through tqdm so active progress bars are redrawn below the message."""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record))
            self.flush()
        except Exception:
            self.handleError(record)


def _level(name: str) -> int:
    return getattr(logging, str(name).upper(), logging.INFO)


def setup_logger(level: Optional[str] = None) -> logging.Logger:
    """Project logger; configured on first call, later calls only change the level when one is given."""
    logger = logging.getLogger(LOGGER_NAME)
    if not any(isinstance(h, TqdmHandler) for h in logger.handlers):
        handler = TqdmHandler()
        handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt="%H:%M:%S"))
        logger.addHandler(handler)
        logger.propagate = False
        logger.setLevel(_level(level or "INFO"))
    elif level is not None:
        logger.setLevel(_level(level))
    return logger


def attach_run_log(path: str | Path) -> logging.FileHandler:
    """Mirror the project logger into a file (full date in the timestamp); detach with detach_run_log."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(p, mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt="%Y-%m-%d %H:%M:%S"))
    setup_logger().addHandler(handler)
    return handler


def detach_run_log(handler: logging.Handler) -> None:
    setup_logger().removeHandler(handler)
    handler.close()
