"""
This module defines the PersistenceService for database interactions.
"""

import sqlite3
from typing import List, Optional

from ..config import BENCH_DB_PATH
from ..models import BenchRecord


class PersistenceService:
    """Handles all database interactions for bench records and logs."""

    def __init__(self, db_path: str = BENCH_DB_PATH):
        self.db_path = db_path
        self._conn: Optional[sqlite3.Connection] = None
        self._cursor: Optional[sqlite3.Cursor] = None

    def __enter__(self) -> "PersistenceService":
        """Establishes the database connection."""
        self._conn = sqlite3.connect(self.db_path)
        self._conn.row_factory = sqlite3.Row
        self._cursor = self._conn.cursor()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        """Commits changes and closes the connection."""
        if self._conn:
            self._conn.commit()
            self._conn.close()
        self._conn = None
        self._cursor = None

    def _get_cursor(self) -> sqlite3.Cursor:
        """Returns the cursor, ensuring the connection is open."""
        if self._cursor is None:
            raise RuntimeError("Database connection is not open. Use 'with' statement.")
        return self._cursor

    def init_db(self) -> None:
        """Initialize SQLite schema if not exists."""
        cur = self._get_cursor()
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS bench_records (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                instance TEXT NOT NULL,
                seed INTEGER NOT NULL,
                config TEXT NOT NULL,
                status TEXT NOT NULL,
                time_s REAL NOT NULL,
                nodes INTEGER NOT NULL,
                objective REAL,
                dual_bound REAL,
                created_at DATETIME DEFAULT CURRENT_TIMESTAMP,
                UNIQUE(instance, seed, config)
            )
            """
        )
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS logs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp DATETIME DEFAULT CURRENT_TIMESTAMP,
                level TEXT NOT NULL,
                message TEXT NOT NULL,
                logger_name TEXT
            )
            """
        )

    def upsert_record(self, record: BenchRecord) -> None:
        """Insert or replace a record identified by (instance, seed, config)."""
        cur = self._get_cursor()
        cur.execute(
            """
            INSERT INTO bench_records (instance, seed, config, status, time_s, nodes, objective, dual_bound)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?)
            ON CONFLICT(instance, seed, config) DO UPDATE SET
                status=excluded.status,
                time_s=excluded.time_s,
                nodes=excluded.nodes,
                objective=excluded.objective,
                dual_bound=excluded.dual_bound,
                created_at=CURRENT_TIMESTAMP
            """,
            (
                record.instance,
                record.seed,
                record.config,
                record.status,
                record.time_s,
                record.nodes,
                record.objective,
                record.dual_bound,
            ),
        )

    def get_records(self, config: Optional[str] = None) -> List[BenchRecord]:
        """Retrieves bench records, optionally for a single config."""
        cur = self._get_cursor()
        query = "SELECT instance, seed, config, status, time_s, nodes, objective, dual_bound FROM bench_records"
        if config is None:
            cur.execute(query + " ORDER BY instance, config, seed")
        else:
            cur.execute(query + " WHERE config = ? ORDER BY instance, seed", (config,))
        return [BenchRecord.from_dict(dict(row)) for row in cur.fetchall()]

    def get_configs(self) -> List[str]:
        cur = self._get_cursor()
        cur.execute("SELECT DISTINCT config FROM bench_records ORDER BY config")
        return [row[0] for row in cur.fetchall()]

    def insert_log(self, level: str, message: str, logger_name: str) -> None:
        cur = self._get_cursor()
        cur.execute(
            "INSERT INTO logs (level, message, logger_name) VALUES (?, ?, ?)",
            (level, message, logger_name),
        )

    def get_all_logs(self, limit: int = 100) -> List[dict]:
        """Retrieves logs from the database, newest first."""
        cur = self._get_cursor()
        cur.execute("SELECT * FROM logs ORDER BY timestamp DESC, id DESC LIMIT ?", (limit,))
        return [dict(row) for row in cur.fetchall()]
