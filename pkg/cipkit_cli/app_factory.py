"""
This module provides a factory for creating and configuring the application's core components.
"""

import logging
from typing import Optional

from cipkit.config import BENCH_DB_PATH, BENCH_WORKERS, LOG_LEVEL
from cipkit.facade import SolverFacade
from cipkit.services.bench_service import BenchService
from cipkit.services.parser_service import ParserService
from cipkit.services.persistence_service import PersistenceService
from cipkit.services.search_service import SearchService
from cipkit.services.signomial_service import SignomialService
from cipkit.services.simplex_service import SimplexService

from .logging_config import setup_logging


def initialize_app(db_path: Optional[str] = None, verbose: bool = False) -> None:
    """
    Initializes the application: prepares the bench database when one is used
    and sets up logging.
    """
    if db_path:
        with PersistenceService(db_path) as persistence_service:
            persistence_service.init_db()
    setup_logging(db_path, logging.DEBUG if verbose else LOG_LEVEL)


def create_facade(db_path: str = BENCH_DB_PATH, workers: int = BENCH_WORKERS) -> SolverFacade:
    """
    Initializes and returns the SolverFacade with all its dependencies.
    """
    simplex_service = SimplexService()
    return SolverFacade(
        parser_service=ParserService(),
        search_service=SearchService(simplex=simplex_service),
        bench_service=BenchService(workers=workers),
        persistence_service=PersistenceService(db_path),
        signomial_service=SignomialService(simplex_service),
    )
