"""
Unit tests for the logging setup.
"""

import logging
from unittest.mock import patch

import pytest

from cipkit.services.persistence_service import PersistenceService
from cipkit_cli.logging_config import SQLiteHandler, setup_logging


@pytest.fixture
def bench_db(tmp_path):
    db_path = str(tmp_path / "logs.db")
    with PersistenceService(db_path) as p:
        p.init_db()
    return db_path


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield root
    for handler in root.handlers[:]:
        root.removeHandler(handler)
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


def test_sqlite_handler_writes_logs(bench_db):
    """Tests that a log record ends up in the logs table."""
    # Arrange
    handler = SQLiteHandler(bench_db)
    handler.setFormatter(logging.Formatter("%(message)s"))
    logger = logging.getLogger("cipkit.tests.sqlite")
    logger.setLevel(logging.INFO)
    logger.addHandler(handler)

    # Act
    try:
        logger.warning("Node 3 LP ended with numerical_error; node dropped.")
    finally:
        logger.removeHandler(handler)

    # Assert
    with PersistenceService(bench_db) as p:
        logs = p.get_all_logs()
    assert logs[0]["message"] == "Node 3 LP ended with numerical_error; node dropped."
    assert logs[0]["level"] == "WARNING"
    assert logs[0]["logger_name"] == "cipkit.tests.sqlite"


def test_sqlite_handler_goes_through_persistence():
    """Tests that the handler stores records with PersistenceService.insert_log."""
    # Arrange
    handler = SQLiteHandler("bench.db")
    handler.setFormatter(logging.Formatter("%(message)s"))
    record = logging.LogRecord("cipkit.tests.persist", logging.INFO, __file__, 1, "Dive found a solution.", None, None)

    # Act
    with patch("cipkit_cli.logging_config.PersistenceService") as mock_persistence:
        handler.emit(record)

    # Assert
    mock_persistence.assert_called_once_with("bench.db")
    p = mock_persistence.return_value.__enter__.return_value
    p.insert_log.assert_called_once_with("INFO", "Dive found a solution.", "cipkit.tests.persist")


def test_setup_logging_handlers(bench_db, restore_root_logger):
    """Tests the console handler alone and together with the database handler."""
    # Act
    setup_logging(None, logging.DEBUG)
    console_only = [type(h) for h in restore_root_logger.handlers]
    setup_logging(bench_db, logging.INFO)
    with_db = [type(h) for h in restore_root_logger.handlers]

    # Assert
    assert console_only == [logging.StreamHandler]
    assert with_db == [logging.StreamHandler, SQLiteHandler]
    with PersistenceService(bench_db) as p:
        assert any("database" in log["message"] for log in p.get_all_logs())
