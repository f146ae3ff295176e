"""
Unit tests for the Flask Dashboard.
"""

from unittest.mock import patch

import pytest

from cipkit.models import BenchRecord
from cipkit.services.bench_service import bracket_report
from dashboard.app import app

RECORDS = [
    BenchRecord("knap", 0, "base", "optimal", 2.0, 12, 1.0),
    BenchRecord("knap", 0, "gmi", "optimal", 1.0, 4, 1.0),
]

# Sample data for mocking the facade's response
SAMPLE_DATA = {
    "records": RECORDS,
    "configs": ["base", "gmi"],
    "table": bracket_report(RECORDS, "base"),
    "logs": [{"timestamp": "2026-10-16 10:00:00", "level": "INFO", "message": "Test log"}],
}

EMPTY_DATA = {
    "records": [],
    "configs": [],
    "table": None,
    "logs": [],
}

ERROR_DATA = {"error": "Database connection failed."}


@pytest.fixture
def client():
    app.config["TESTING"] = True
    with app.test_client() as client:
        yield client


def test_dashboard_displays_data(client):
    """
    Tests that the dashboard renders the bracket table, records and logs from the facade.
    """
    # Arrange
    mock_facade = patch("cipkit.facade.SolverFacade").start()
    mock_facade.get_dashboard_data.return_value = SAMPLE_DATA
    app.config["FACADE"] = mock_facade

    # Act
    response = client.get("/")

    # Assert
    assert response.status_code == 200
    # Check for bracket table data
    assert b"diff-timeouts" in response.data
    assert b"both-solved" in response.data
    # Check for record data
    assert b"knap" in response.data
    assert b"gmi" in response.data
    # Check for log data
    assert b"Test log" in response.data
    patch.stopall()


def test_dashboard_passes_baseline(client):
    """
    Tests that the baseline query parameter reaches the facade.
    """
    # Arrange
    mock_facade = patch("cipkit.facade.SolverFacade").start()
    mock_facade.get_dashboard_data.return_value = EMPTY_DATA
    app.config["FACADE"] = mock_facade

    # Act
    client.get("/?baseline=gmi")

    # Assert
    mock_facade.get_dashboard_data.assert_called_once_with("gmi")
    patch.stopall()


def test_dashboard_handles_empty_data(client):
    """
    Tests that the dashboard renders correctly when the facade returns no data.
    """
    # Arrange
    mock_facade = patch("cipkit.facade.SolverFacade").start()
    mock_facade.get_dashboard_data.return_value = EMPTY_DATA
    app.config["FACADE"] = mock_facade

    # Act
    response = client.get("/")

    # Assert
    assert response.status_code == 200
    assert b"No bench records found." in response.data
    assert b"No records found." in response.data
    assert b"No logs found." in response.data
    patch.stopall()


def test_dashboard_displays_error(client):
    """
    Tests that the dashboard displays an error message when the facade returns an error.
    """
    # Arrange
    mock_facade = patch("cipkit.facade.SolverFacade").start()
    mock_facade.get_dashboard_data.return_value = ERROR_DATA
    app.config["FACADE"] = mock_facade

    # Act
    response = client.get("/")

    # Assert
    assert response.status_code == 200
    assert b"Database connection failed." in response.data
    patch.stopall()
