"""
This module contains a Flask-based web dashboard showing the bracket table of
the stored bench records and the recent log lines.
"""

from typing import Optional

from flask import Flask, render_template, request

from cipkit.config import DASHBOARD_PORT
from cipkit.facade import SolverFacade

app = Flask(__name__)


@app.route("/")
def dashboard():
    """Renders the main dashboard page."""
    facade: SolverFacade = app.config["FACADE"]
    baseline = request.args.get("baseline") or app.config.get("BASELINE")
    data = facade.get_dashboard_data(baseline)
    return render_template(
        "dashboard.html",
        table=data.get("table"),
        records=data.get("records", []),
        configs=data.get("configs", []),
        logs=data.get("logs", []),
        error=data.get("error"),
    )


def run_dashboard(facade: SolverFacade, baseline: Optional[str] = None, port: int = DASHBOARD_PORT):
    """Runs the Flask development server."""
    app.config["FACADE"] = facade
    app.config["BASELINE"] = baseline
    # Running on 0.0.0.0 makes it accessible from outside the container
    app.run(host="0.0.0.0", port=port)
