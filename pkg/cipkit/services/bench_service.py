"""
This module defines the BenchService: benchmark batches over instances,
seeds and solver configurations, and the bracket tables that compare two
configurations with shifted geometric means.
"""

import concurrent.futures
import json
import logging
import math
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, TextIO, Tuple

import numpy as np

from ..config import BENCH_BRACKETS, BENCH_NODE_SHIFT, BENCH_TIME_SHIFT, BENCH_WORKERS
from ..exceptions import BenchError, ModelError, ParsingError
from ..models import (
    BenchRecord,
    BranchingKind,
    CutSelectorKind,
    FilterMode,
    Regularization,
    SolverConfig,
    SymmetryHandling,
    SymmetryMode,
)
from .parser_service import ParserService
from .search_service import SearchService

logger = logging.getLogger(__name__)

AFFECTED_TIME_DELTA = 0.05
OBJECTIVE_TOL = 1e-6


def shifted_geomean(values: Iterable[float], shift: float) -> float:
    """
    Computes (prod(v_i + s))^(1/n) - s in log space.

    Raises:
        BenchError: If values is empty or negative, or the shift is not positive.
    """
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise BenchError("Shifted geometric mean of an empty list.")
    if shift <= 0:
        raise BenchError(f"Shift must be positive, got {shift}.")
    if (arr < 0).any():
        raise BenchError("Shifted geometric mean needs nonnegative values.")
    mean = float(np.exp(np.mean(np.log(arr + shift)))) - shift
    return float(np.clip(mean, arr.min(), arr.max()))


# --- solver configuration from options ---


def _on_off(value) -> Optional[bool]:
    if isinstance(value, bool) or value is None:
        return value
    text = str(value).strip().lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    if text == "auto":
        return None
    raise ValueError(f"expected on, off or auto, got '{value}'")


def _optional_int(value) -> Optional[int]:
    if value is None or str(value).strip().lower() in ("none", ""):
        return None
    return int(value)


_TOP_LEVEL: Dict[str, Tuple[str, Callable]] = {
    "cutsel": ("cutsel", CutSelectorKind),
    "branching": ("branching", BranchingKind),
    "symmetry": ("symmetry", SymmetryMode),
    "symmetry-handling": ("symmetry_handling", SymmetryHandling),
    "lagromory-freq": ("lagromory_freq", int),
    "indicator-diving": ("indicator_diving", _on_off),
    "time-limit": ("time_limit", float),
    "node-limit": ("node_limit", int),
    "max-cut-rounds": ("max_cut_rounds", int),
    "max-cut-depth": ("max_cut_depth", int),
    "max-cuts-per-round": ("max_cuts_per_round", int),
    "min-orthogonality": ("min_orthogonality", float),
    "gmi-max-cands": ("gmi_max_cands", int),
    "signomial-max-undervars": ("signomial_max_undervars", int),
}

_NESTED: Dict[str, Tuple[str, str, Callable]] = {
    "w-eff": ("hybrid_weights", "w_eff", float),
    "w-intsup": ("hybrid_weights", "w_intsup", float),
    "w-objpar": ("hybrid_weights", "w_objpar", float),
    "w-dcd": ("hybrid_weights", "w_dcd", float),
    "dynamic-mingain": ("dynamic", "mingain", float),
    "dynamic-filtermode": ("dynamic", "filtermode", FilterMode),
    "ensemble-max-density": ("ensemble", "max_density", float),
    "ensemble-parallelism-penalty": ("ensemble", "parallelism_penalty", float),
    "ensemble-nnz-budget": ("ensemble", "nnz_budget", _optional_int),
    "gmi-avg-eff-weight": ("branch_weights", "gmiavgeffweight", float),
    "gmi-last-eff-weight": ("branch_weights", "gmilasteffweight", float),
    "dive-max-depth": ("dive", "max_depth", int),
    "dive-lp-iter-budget": ("dive", "lp_iter_budget", int),
    "lagromory-max-iters": ("lagromory", "max_iters", int),
    "lagromory-stabilization": ("lagromory", "stabilization", float),
    "lagromory-regularization": ("lagromory", "regularization", Regularization),
    "lagromory-radius": ("lagromory", "radius", float),
    "lagromory-degeneracy": ("lagromory", "degeneracy_threshold", float),
}

OPTION_NAMES = tuple(sorted(list(_TOP_LEVEL) + list(_NESTED)))


def build_solver_config(options: Mapping[str, object], base: Optional[SolverConfig] = None) -> SolverConfig:
    """
    Builds a SolverConfig from option names as they appear on the command line
    (with or without leading dashes, underscores accepted for hyphens).

    Raises:
        BenchError: On unknown keys or values that do not convert.
    """
    top: Dict[str, object] = {}
    nested: Dict[str, Dict[str, object]] = defaultdict(dict)
    for raw_key, raw_value in options.items():
        key = raw_key.strip().lstrip("-").replace("_", "-")
        try:
            if key in _TOP_LEVEL:
                name, convert = _TOP_LEVEL[key]
                top[name] = convert(raw_value)
            elif key in _NESTED:
                group, name, convert = _NESTED[key]
                nested[group][name] = convert(raw_value)
            else:
                raise BenchError(f"Unknown configuration key '{raw_key}'.")
        except (TypeError, ValueError) as e:
            raise BenchError(f"Bad value for '{raw_key}': {e}") from e

    config = base or SolverConfig()
    try:
        config = replace(config, **top)
        for group, values in nested.items():
            config = replace(config, **{group: replace(getattr(config, group), **values)})
    except ModelError as e:
        raise BenchError(f"Invalid solver configuration: {e}") from e
    return config


def parse_config_text(text: str, source: str = "<string>") -> SolverConfig:
    options: Dict[str, str] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BenchError(f"{source}, line {line_no}: expected 'key = value'.")
        key, value = (part.strip() for part in line.split("=", 1))
        options[key] = value
    return build_solver_config(options)


def load_config_file(path: Path) -> Tuple[str, SolverConfig]:
    """Reads a `key = value` configuration file; the config id is the file stem."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise BenchError(f"Cannot read configuration file {path}: {e}") from e
    return path.stem, parse_config_text(text, str(path))


# --- running ---


def solve_instance(path: Path, seed: int, config_id: str, config: SolverConfig) -> BenchRecord:
    """Parses and solves one instance; every failure becomes a status row."""
    instance = Path(path).stem
    try:
        problem = ParserService().parse_problem(path)
    except (ParsingError, OSError) as e:
        logger.warning(f"Instance {instance} could not be parsed: {e}")
        return BenchRecord(instance, seed, config_id, "parse_error")
    try:
        start = time.perf_counter()
        result = SearchService().solve(problem, config, seed)
        elapsed = time.perf_counter() - start
    except Exception as e:
        logger.exception(f"Solve of {instance} (seed {seed}, config {config_id}) failed: {e}")
        return BenchRecord(instance, seed, config_id, "error")
    objective = problem.reported_objective(result.solution.objective) if result.solution else None
    dual = result.stats.dual_bound
    dual = problem.reported_objective(dual) if math.isfinite(dual) else None
    return BenchRecord(
        instance, seed, config_id, result.status.value, elapsed, result.stats.nodes, objective, dual
    )


class BenchService:
    """Runs benchmark batches and writes JSON-lines records as they complete."""

    def __init__(self, workers: int = BENCH_WORKERS, solver: Callable[..., BenchRecord] = solve_instance):
        self.workers = max(1, workers)
        self.solver = solver

    def run_bench(
        self,
        instances: Sequence[Path],
        seeds: Sequence[int],
        configs: Sequence[Tuple[str, SolverConfig]],
        time_limit: Optional[float] = None,
        out: Optional[TextIO] = None,
        on_record: Optional[Callable[[BenchRecord], None]] = None,
    ) -> List[BenchRecord]:
        """
        Runs the full instance x config x seed cross product.

        Args:
            instances: Instance files (cip or mps).
            seeds: Seeds passed to every solve.
            configs: Pairs of config id and SolverConfig.
            time_limit: Overrides the time limit of every config.
            out: Stream receiving one JSON object per line in submission order.
            on_record: Callback invoked for every record in submission order.

        Returns:
            The records in submission order.
        """
        jobs = []
        for path in sorted(Path(p) for p in instances):
            for config_id, config in configs:
                if time_limit is not None:
                    config = replace(config, time_limit=time_limit)
                for seed in seeds:
                    jobs.append((path, seed, config_id, config))
        logger.info(
            f"Starting bench: {len(instances)} instances x {len(configs)} configs x {len(seeds)} seeds "
            f"= {len(jobs)} runs on {self.workers} worker(s)."
        )

        records: List[BenchRecord] = []
        if self.workers == 1:
            for job in jobs:
                self._emit(self._run_job(job), records, out, on_record)
            return records

        with concurrent.futures.ProcessPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self.solver, *job) for job in jobs]
            for job, future in zip(jobs, futures):
                try:
                    record = future.result()
                except Exception as e:
                    logger.exception(f"Worker failed on {job[0]}: {e}")
                    record = BenchRecord(Path(job[0]).stem, job[1], job[2], "error")
                self._emit(record, records, out, on_record)
        return records

    def _run_job(self, job) -> BenchRecord:
        try:
            return self.solver(*job)
        except Exception as e:
            logger.exception(f"Bench run on {job[0]} failed: {e}")
            return BenchRecord(Path(job[0]).stem, job[1], job[2], "error")

    @staticmethod
    def _emit(record, records, out, on_record) -> None:
        records.append(record)
        if out is not None:
            out.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")
            out.flush()
        if on_record is not None:
            on_record(record)
        logger.info(
            f"Bench row: {record.instance} seed {record.seed} config {record.config}: "
            f"{record.status} in {record.time_s:.2f}s, {record.nodes} nodes."
        )


def read_records(path: Path) -> List[BenchRecord]:
    """Reads a JSON-lines record file."""
    records = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(BenchRecord.from_dict(json.loads(line)))
            except (ValueError, KeyError, ModelError) as e:
                raise BenchError(f"{path}, line {line_no}: bad record: {e}") from e
    return records


# --- reporting ---


@dataclass
class BracketRow:
    name: str
    count: int
    solved_baseline: int
    solved_candidate: Optional[int]
    time_baseline: Optional[float]
    time_candidate: Optional[float]
    nodes_baseline: Optional[float]
    nodes_candidate: Optional[float]
    time_ratio: Optional[float]
    node_ratio: Optional[float]


@dataclass
class BracketTable:
    baseline: str
    candidate: Optional[str]
    rows: List[BracketRow]
    total: int
    both_unsolved: int = 0
    inconsistent: List[Tuple[str, int]] = field(default_factory=list)
    subsets: Dict[str, List[Tuple[str, int]]] = field(default_factory=dict)

    def row(self, name: str) -> BracketRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def to_dict(self) -> Dict[str, object]:
        return {
            "baseline": self.baseline,
            "candidate": self.candidate,
            "total": self.total,
            "both_unsolved": self.both_unsolved,
            "inconsistent": [list(key) for key in self.inconsistent],
            "rows": [vars(row) for row in self.rows],
        }

    def format(self) -> str:
        def num(value: Optional[float], digits: int = 2) -> str:
            return "-" if value is None else f"{value:.{digits}f}"

        candidate = self.candidate or "-"
        header = (
            f"{'subset':<16}{'count':>7}{'solved ' + self.baseline:>16}{'solved ' + candidate:>16}"
            f"{'time':>10}{'time':>10}{'rel':>7}{'nodes':>11}{'nodes':>11}{'rel':>7}"
        )
        lines = [header, "-" * len(header)]
        for r in self.rows:
            solved_candidate = "-" if r.solved_candidate is None else str(r.solved_candidate)
            lines.append(
                f"{r.name:<16}{r.count:>7}{r.solved_baseline:>16}{solved_candidate:>16}"
                f"{num(r.time_baseline):>10}{num(r.time_candidate):>10}{num(r.time_ratio):>7}"
                f"{num(r.nodes_baseline, 0):>11}{num(r.nodes_candidate, 0):>11}{num(r.node_ratio):>7}"
            )
        if self.inconsistent:
            flagged = ", ".join(f"{name}/{seed}" for name, seed in self.inconsistent)
            lines.append(f"excluded (inconsistent results): {flagged}")
        return "\n".join(lines)


def _is_affected(a: BenchRecord, b: BenchRecord) -> bool:
    if a.solved != b.solved or a.nodes != b.nodes:
        return True
    return abs(a.time_s - b.time_s) > AFFECTED_TIME_DELTA * max(a.time_s, b.time_s)


def _is_inconsistent(a: BenchRecord, b: BenchRecord) -> bool:
    if not (a.solved and b.solved):
        return False
    if a.status != b.status:
        return True
    if a.objective is None or b.objective is None:
        return False
    return abs(a.objective - b.objective) > OBJECTIVE_TOL * max(1.0, abs(a.objective), abs(b.objective))


def bracket_report(
    records: Sequence[BenchRecord],
    baseline: str,
    shifts: Tuple[float, float] = (BENCH_TIME_SHIFT, BENCH_NODE_SHIFT),
    brackets: Sequence[float] = BENCH_BRACKETS,
) -> BracketTable:
    """
    Builds the subset table comparing the baseline config against the other one.
    Every (instance, seed) pair is one observation. Ratios are baseline mean
    divided by candidate mean, so values above 1 favour the candidate.

    Raises:
        BenchError: If the baseline is missing or more than two configs are present.
    """
    by_config: Dict[str, Dict[Tuple[str, int], BenchRecord]] = defaultdict(dict)
    for record in records:
        by_config[record.config][record.key] = record
    if baseline not in by_config:
        raise BenchError(f"Baseline config '{baseline}' not found in records.")
    others = sorted(c for c in by_config if c != baseline)
    if len(others) > 1:
        raise BenchError(f"Expected at most two configs, found {', '.join([baseline] + others)}.")
    candidate = others[0] if others else None
    time_shift, node_shift = shifts

    base = by_config[baseline]
    cand = by_config[candidate] if candidate else {}
    if candidate:
        keys = sorted(set(base) & set(cand))
        unmatched = set(base) ^ set(cand)
        if unmatched:
            logger.warning(f"{len(unmatched)} records have no counterpart in the other config and are ignored.")
    else:
        keys = sorted(base)

    inconsistent = [k for k in keys if candidate and _is_inconsistent(base[k], cand[k])]
    if inconsistent:
        logger.warning(f"{len(inconsistent)} instance/seed pairs have inconsistent results and are excluded.")
    keys = [k for k in keys if k not in set(inconsistent)]

    def solved_by(k):
        return [base[k].solved] + ([cand[k].solved] if candidate else [])

    def max_time(k):
        return max([base[k].time_s] + ([cand[k].time_s] if candidate else []))

    subsets: Dict[str, List[Tuple[str, int]]] = {"all": keys}
    if candidate:
        subsets["affected"] = [k for k in keys if _is_affected(base[k], cand[k])]
    for t in brackets:
        subsets[f"[{t:g},tilim]"] = [k for k in keys if any(solved_by(k)) and max_time(k) >= t]
    if candidate:
        subsets["diff-timeouts"] = [k for k in keys if sum(solved_by(k)) == 1]
    subsets["both-solved"] = [k for k in keys if all(solved_by(k))]
    both_unsolved = sum(1 for k in keys if not any(solved_by(k)))

    def mean(table, subset, attribute, shift):
        if not subset:
            return None
        return shifted_geomean([getattr(table[k], attribute) for k in subset], shift)

    def ratio(a, b):
        if a is None or b is None:
            return None
        if b == 0:
            return 1.0 if a == 0 else math.inf
        return a / b

    rows = []
    for name, subset in subsets.items():
        tb = mean(base, subset, "time_s", time_shift)
        nb = mean(base, subset, "nodes", node_shift)
        tc = mean(cand, subset, "time_s", time_shift) if candidate else None
        nc = mean(cand, subset, "nodes", node_shift) if candidate else None
        rows.append(
            BracketRow(
                name=name,
                count=len(subset),
                solved_baseline=sum(1 for k in subset if base[k].solved),
                solved_candidate=sum(1 for k in subset if cand[k].solved) if candidate else None,
                time_baseline=tb,
                time_candidate=tc,
                nodes_baseline=nb,
                nodes_candidate=nc,
                time_ratio=ratio(tb, tc),
                node_ratio=ratio(nb, nc),
            )
        )
    return BracketTable(baseline, candidate, rows, len(keys), both_unsolved, inconsistent, subsets)
