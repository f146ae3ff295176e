"""
This module defines the central facade for the solver kernel.
"""

import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .exceptions import BenchError, CipkitError, ParsingError, SignomialError
from .models import BenchRecord, Cut, Problem, SolverConfig
from .services.bench_service import BenchService, BracketTable, bracket_report, load_config_file, read_records
from .services.parser_service import ParserService
from .services.persistence_service import PersistenceService
from .services.search_service import SearchService, SolveResult
from .services.signomial_service import SignomialService

logger = logging.getLogger(__name__)

INSTANCE_SUFFIXES = (".cip", ".mps")
DB_SUFFIXES = (".db", ".sqlite", ".sqlite3")


def _finite(value: float) -> Optional[float]:
    return value if math.isfinite(value) else None


class SolverFacade:
    """
    The central entry point for the solver kernel.
    It wires parsing, solving, benchmarking and persistence together.
    """

    def __init__(
        self,
        parser_service: ParserService,
        search_service: SearchService,
        bench_service: BenchService,
        persistence_service: PersistenceService,
        signomial_service: SignomialService,
    ):
        self.parser_service = parser_service
        self.search_service = search_service
        self.bench_service = bench_service
        self.persistence_service = persistence_service
        self.signomial_service = signomial_service

    def load_problem(self, path: str) -> Problem:
        try:
            return self.parser_service.parse_problem(path)
        except ParsingError as e:
            logger.warning(f"Could not parse {path}: {e}")
            raise

    def solve_file(self, path: str, config: SolverConfig = SolverConfig(), seed: int = 0) -> Tuple[Problem, SolveResult]:
        """
        Parses and solves one instance file.

        Args:
            path: The cip or mps file.
            config: The solver configuration.
            seed: Seed for node tie-breaking.

        Returns:
            The parsed problem and the solve result.

        Raises:
            ParsingError: If the file cannot be read.
        """
        problem = self.load_problem(path)
        logger.info(f"Solving {problem.name} with {config.describe()} and seed {seed}.")
        return problem, self.search_service.solve(problem, config, seed)

    @staticmethod
    def summarize(problem: Problem, result: SolveResult) -> Dict[str, object]:
        """Converts a solve result into a JSON-friendly dict in the problem's original sense."""
        stats = result.stats
        objective = problem.reported_objective(result.solution.objective) if result.solution else None
        dual = problem.reported_objective(stats.dual_bound) if math.isfinite(stats.dual_bound) else None
        summary: Dict[str, object] = {
            "instance": problem.name,
            "status": result.status.value,
            "objective": objective,
            "dual_bound": dual,
            "gap": _finite(stats.gap),
            "nodes": stats.nodes,
            "lp_iterations": stats.lp_iterations,
            "time_s": stats.time_s,
            "root_lp_bound": _finite(problem.reported_objective(stats.root_lp_bound)),
            "cuts_generated": dict(stats.cuts_generated),
            "cuts_kept": dict(stats.cuts_kept),
        }
        if result.solution is not None:
            summary["solution"] = {problem.var_label(j): v for j, v in enumerate(result.solution.values)}
        return summary

    def separate_signomials(self, path: str, point: Mapping[str, float]) -> List[Cut]:
        """
        Separates the signomial terms of an instance at a point given by variable name.

        Raises:
            ParsingError: If the file cannot be read.
            SignomialError: If the point misses a variable of a term.
        """
        problem = self.load_problem(path)
        x = [0.0] * problem.num_vars
        needed = {j for term in problem.signomials for j in term.var_indices + (term.aux,)}
        for j in needed:
            name = problem.var_label(j)
            if name not in point:
                raise SignomialError(f"No value given for '{name}'.")
            x[j] = float(point[name])
        cuts = self.signomial_service.separate_problem(problem, x)
        logger.info(f"{len(cuts)} signomial cuts separated for {problem.name}.")
        return cuts

    # --- Bench Methods ---

    @staticmethod
    def find_instances(directory: str) -> List[Path]:
        root = Path(directory)
        if not root.is_dir():
            raise BenchError(f"Instance directory {directory} does not exist.")
        return sorted(p for p in root.iterdir() if p.suffix.lower() in INSTANCE_SUFFIXES)

    def run_bench(
        self,
        directory: str,
        seeds: Sequence[int],
        config_paths: Sequence[str],
        out_path: Optional[str] = None,
        time_limit: Optional[float] = None,
        store: bool = False,
    ) -> List[BenchRecord]:
        """
        Runs a benchmark over every instance of a directory.

        Args:
            directory: Directory holding .cip and .mps files.
            seeds: Seeds for every (instance, config) pair.
            config_paths: Configuration files; each file stem is its config id.
            out_path: JSON-lines output file, written incrementally.
            time_limit: Overrides the configured time limit.
            store: Also upsert every record into the bench database.

        Returns:
            All records in submission order.

        Raises:
            BenchError: If the directory or a configuration file is invalid.
        """
        instances = self.find_instances(directory)
        configs = [load_config_file(Path(p)) for p in config_paths]
        ids = [config_id for config_id, _ in configs]
        if len(set(ids)) != len(ids):
            raise BenchError(f"Config ids must be unique, got {ids}.")

        if store:
            with self.persistence_service as p:
                p.init_db()

        def on_record(record: BenchRecord) -> None:
            if not store:
                return
            try:
                with self.persistence_service as p:
                    p.upsert_record(record)
            except Exception as e:
                logger.exception(f"Failed to store record for {record.instance}: {e}")

        handle = open(out_path, "w", encoding="utf-8") if out_path else io.StringIO()
        try:
            return self.bench_service.run_bench(instances, seeds, configs, time_limit, handle, on_record)
        finally:
            handle.close()

    def load_records(self, source: str) -> List[BenchRecord]:
        """Reads records from a JSON-lines file or a bench database."""
        if Path(source).suffix.lower() in DB_SUFFIXES:
            db = PersistenceService(source)
            with db as p:
                return p.get_records()
        return read_records(Path(source))

    def report(self, source: str, baseline: str) -> BracketTable:
        records = self.load_records(source)
        logger.info(f"Building bracket report from {len(records)} records with baseline '{baseline}'.")
        return bracket_report(records, baseline)

    def get_dashboard_data(self, baseline: Optional[str] = None) -> dict:
        """Retrieves all necessary data for the dashboard."""
        try:
            with self.persistence_service as p:
                p.init_db()
                records = p.get_records()
                configs = p.get_configs()
                logs = p.get_all_logs()
            table = None
            if records:
                table = bracket_report(records, baseline or configs[0])
            return {"records": records, "configs": configs, "table": table, "logs": logs}
        except CipkitError as e:
            logger.warning(f"Dashboard data incomplete: {e}")
            return {"records": [], "configs": [], "table": None, "logs": [], "error": str(e)}
        except Exception as e:
            logger.exception("Failed to retrieve dashboard data.")
            return {"records": [], "configs": [], "table": None, "logs": [], "error": str(e)}
