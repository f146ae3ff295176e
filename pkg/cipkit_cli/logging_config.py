"""
This module sets up console logging and an optional database logging handler.
"""

import logging
import sys
from logging import Handler, LogRecord
from typing import Optional

from cipkit.config import LOG_LEVEL
from cipkit.services.persistence_service import PersistenceService

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class SQLiteHandler(Handler):
    """
    A logging handler that writes records to the logs table of a bench database.
    """

    def __init__(self, db_path: str):
        super().__init__()
        self.db_path = db_path

    def emit(self, record: LogRecord) -> None:
        """
        Writes the log record to the database.
        """
        try:
            with PersistenceService(self.db_path) as p:
                p.insert_log(record.levelname, self.format(record), record.name)
        except Exception:
            self.handleError(record)


def setup_logging(db_path: Optional[str] = None, level: int = LOG_LEVEL) -> None:
    """
    Configures the root logger with a console handler and, when a database
    path is given, the SQLiteHandler.
    """
    logger = logging.getLogger()
    logger.setLevel(level)

    # Remove any existing handlers to avoid duplicates
    for handler in logger.handlers[:]:
        logger.removeHandler(handler)

    formatter = logging.Formatter(LOG_FORMAT)
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if db_path:
        db_handler = SQLiteHandler(db_path)
        db_handler.setLevel(max(level, logging.INFO))
        db_handler.setFormatter(formatter)
        logger.addHandler(db_handler)
        logging.info(f"Logging configured to use console and database {db_path}.")
