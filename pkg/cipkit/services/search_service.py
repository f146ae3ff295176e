"""
This module defines the SearchService, the branch-and-cut driver.

Nodes are selected best-bound first with short plunges. Every node solves its
LP, runs GMI cut rounds within the cut depth, and branches with the configured
rule. The root additionally runs symmetry handling, indicator diving and the
Lagromory separator when enabled.
"""

import heapq
import logging
import math
import random
import time
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

from ..config import GAP_LIMIT, MIN_CUT_EFFICACY, PLUNGE_DEPTH
from ..models import (
    BranchingKind,
    Cut,
    Problem,
    Solution,
    SolverConfig,
    SymmetryHandling,
    SymmetryMode,
)
from .branching_service import (
    BranchCounters,
    Direction,
    GmiBranchingRule,
    GmiEffStats,
    HybridBranchingRule,
    MostFractionalRule,
    PseudoCostStore,
    branching_candidates,
    fractionality,
    record_gmi_round,
)
from .cutsel_service import SelectionContext, make_selector
from .diving_service import DivingService
from .gmi_service import GmiService, efficacy
from .lagromory_service import LagromoryService, runs_at_depth
from .oracle_service import OracleService
from .propagation_service import propagate_bounds
from .simplex_service import LpResult, LpStatus, SimplexService, VarStatus
from .symmetry_service import SymmetryService

logger = logging.getLogger(__name__)

CUTOFF_TOL = 1e-7
ROUND_GAIN_TOL = 1e-6


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node_limit"
    TIME_LIMIT = "time_limit"


@dataclass
class Node:
    id: int
    depth: int
    bounds: Dict[int, Tuple[float, float]] = field(default_factory=dict)
    local_cuts: Tuple[Cut, ...] = ()
    warm_basis: Optional[List[VarStatus]] = None
    lower_bound: float = -math.inf
    parent: Optional[int] = None
    branch_var: Optional[int] = None
    branch_dir: Optional[Direction] = None
    branch_dist: float = 0.0


@dataclass
class SolveStats:
    nodes: int = 0
    lp_iterations: int = 0
    cuts_generated: Counter = field(default_factory=Counter)
    cuts_kept: Counter = field(default_factory=Counter)
    primal_bound: float = math.inf
    dual_bound: float = -math.inf
    root_lp_bound: float = -math.inf
    time_s: float = 0.0
    numerical_failures: int = 0
    incumbent_history: List[float] = field(default_factory=list)
    dual_history: List[float] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if math.isfinite(self.primal_bound) and math.isfinite(self.dual_bound):
            return (self.primal_bound - self.dual_bound) / max(abs(self.primal_bound), 1e-9)
        return math.inf


@dataclass
class SolveResult:
    status: SolveStatus
    solution: Optional[Solution]
    stats: SolveStats
    global_cuts: List[Cut] = field(default_factory=list)


class _Unbounded(Exception):
    pass


class _SearchRun:
    def __init__(self, service: "SearchService", problem: Problem, config: SolverConfig, seed: int):
        self.svc = service
        self.problem = problem
        self.config = config
        self.tol = config.tolerances
        self.rng = random.Random(seed)
        self.selector = make_selector(config)
        if config.branching == BranchingKind.GMI:
            self.rule = GmiBranchingRule(service.gmi, config.gmi_max_cands)
        elif config.branching == BranchingKind.MOSTFRAC:
            self.rule = MostFractionalRule()
        else:
            self.rule = HybridBranchingRule(config.branch_weights)
        self.global_cuts: List[Cut] = []
        self.pool: List[Cut] = []
        self.incumbent: Optional[Solution] = None
        self.stats = SolveStats()
        self.gmi_stats = GmiEffStats()
        self.pseudo = PseudoCostStore()
        self.counters = BranchCounters()
        self.heap: List[tuple] = []
        self.next_id = 0
        self.start = time.perf_counter()

    # --- tree management ---

    def _new_id(self) -> int:
        self.next_id += 1
        return self.next_id - 1

    def _push(self, node: Node) -> None:
        heapq.heappush(self.heap, (node.lower_bound, self.rng.random(), node.id, node))

    def _open_bound(self, current: Optional[Node]) -> float:
        bounds = [entry[0] for entry in self.heap]
        if current is not None:
            bounds.append(current.lower_bound)
        if not bounds:
            return self.incumbent.objective if self.incumbent else math.inf
        value = min(bounds)
        return min(value, self.incumbent.objective) if self.incumbent else value

    def _record_dual(self, current: Optional[Node]) -> None:
        value = max(self.stats.dual_bound, self._open_bound(current))
        self.stats.dual_bound = value
        self.stats.dual_history.append(value)

    def _cutoff(self, bound: float) -> bool:
        return self.incumbent is not None and bound >= self.incumbent.objective - CUTOFF_TOL

    def _gap_closed(self) -> bool:
        if self.incumbent is None:
            return False
        gap = (self.incumbent.objective - self.stats.dual_bound) / max(abs(self.incumbent.objective), 1e-9)
        return gap <= GAP_LIMIT and self.stats.dual_bound >= self.incumbent.objective - CUTOFF_TOL

    def _new_incumbent(self, solution: Solution, source: str) -> None:
        if self.incumbent is not None and solution.objective >= self.incumbent.objective - 1e-9:
            return
        self.incumbent = solution
        self.stats.primal_bound = solution.objective
        self.stats.incumbent_history.append(solution.objective)
        logger.info(f"New incumbent {self.problem.reported_objective(solution.objective):.6g} from {source}.")

    # --- main loop ---

    def execute(self) -> SolveResult:
        config = self.config
        if config.symmetry != SymmetryMode.NONE and config.symmetry_handling == SymmetryHandling.SST:
            _, sst_cuts = self.svc.symmetry.symmetry_cuts(self.problem, config.symmetry)
            self.global_cuts.extend(sst_cuts)
            self.stats.cuts_generated["sst"] += len(sst_cuts)
            self.stats.cuts_kept["sst"] += len(sst_cuts)

        status: Optional[SolveStatus] = None
        current: Optional[Node] = Node(id=self._new_id(), depth=0)
        plunge = 0
        while True:
            if current is None:
                if not self.heap:
                    break
                current = heapq.heappop(self.heap)[-1]
            if time.perf_counter() - self.start > config.time_limit:
                status = SolveStatus.TIME_LIMIT
                break
            if self.stats.nodes >= config.node_limit:
                status = SolveStatus.NODE_LIMIT
                break
            if self._cutoff(current.lower_bound):
                current = None
                continue
            try:
                children = self._process(current)
            except _Unbounded:
                status = SolveStatus.UNBOUNDED
                current = None
                break
            if children and plunge < PLUNGE_DEPTH:
                current, rest = children[0], children[1:]
                for child in rest:
                    self._push(child)
                plunge += 1
            else:
                for child in children:
                    self._push(child)
                current = None
                plunge = 0
            self._record_dual(current)
            if self._gap_closed():
                self.heap.clear()
                current = None

        if status is None:
            status = SolveStatus.OPTIMAL if self.incumbent is not None else SolveStatus.INFEASIBLE
        if status == SolveStatus.OPTIMAL:
            self.stats.dual_bound = self.incumbent.objective
        elif status == SolveStatus.INFEASIBLE:
            self.stats.dual_bound = math.inf
        elif status == SolveStatus.UNBOUNDED:
            self.stats.dual_bound = -math.inf
        else:
            self.stats.dual_bound = max(self.stats.dual_bound, self._open_bound(current))
        self.stats.time_s = time.perf_counter() - self.start
        logger.info(
            f"Solve finished: {status.value}, {self.stats.nodes} nodes, "
            f"{self.stats.lp_iterations} LP iterations, {self.stats.time_s:.2f}s."
        )
        return SolveResult(status, self.incumbent, self.stats, list(self.global_cuts))

    # --- node processing ---

    def _solve_lp(self, node_problem: Problem, cuts: Sequence[Cut], warm: Optional[List[VarStatus]]) -> LpResult:
        rows = [cut.to_row(f"cut{i}") for i, cut in enumerate(cuts)]
        lp_problem = node_problem.with_rows(rows)
        lp = self.svc.simplex.solve_lp(lp_problem, warm_basis=warm)
        self.stats.lp_iterations += lp.iterations
        if lp.status in (LpStatus.NUMERICAL_ERROR, LpStatus.ITERATION_LIMIT) and warm is not None:
            lp = self.svc.simplex.solve_lp(lp_problem)
            self.stats.lp_iterations += lp.iterations
        return lp

    def _process(self, node: Node) -> List[Node]:
        self.stats.nodes += 1
        problem = self.problem
        lower, upper = list(problem.lower), list(problem.upper)
        for j, (lo, up) in node.bounds.items():
            lower[j], upper[j] = lo, up
        if not propagate_bounds(problem, lower, upper, self.tol):
            self._infeasible(node)
            return []
        node_problem = problem.with_bounds(lower, upper)

        cuts = list(self.global_cuts) + list(node.local_cuts)
        lp = self._solve_lp(node_problem, cuts, node.warm_basis)
        if lp.status == LpStatus.INFEASIBLE:
            self._infeasible(node)
            return []
        if lp.status == LpStatus.UNBOUNDED:
            if node.depth == 0:
                raise _Unbounded()
            logger.warning(f"Node {node.id} LP unbounded below a bounded root; node dropped.")
            return []
        if not lp.is_optimal:
            logger.warning(f"Node {node.id} LP ended with {lp.status.value}; node dropped.")
            self.stats.numerical_failures += 1
            return []

        if node.depth == 0:
            self.stats.root_lp_bound = lp.objective
            logger.info(f"Root LP bound {problem.reported_objective(lp.objective):.6g}.")
        self._update_pseudocosts(node, lp.objective)
        bound = max(lp.objective, node.lower_bound)
        logger.debug(f"Node {node.id} depth {node.depth}: LP {lp.objective:.6g}.")
        if self._cutoff(bound):
            return []

        local_new: List[Cut] = []
        if node.depth <= self.config.max_cut_depth:
            lp, bound, infeasible = self._cut_rounds(node, node_problem, lp, bound, local_new)
            if infeasible:
                return []
            if self._cutoff(bound):
                return []

        all_cuts = list(self.global_cuts) + list(node.local_cuts) + local_new
        if runs_at_depth(self.config.lagromory_freq, node.depth, self.config.max_cut_depth):
            bound = self._lagromory(node, node_problem, all_cuts, lp, bound)
        if node.depth == 0 and self._diving_enabled():
            self._dive(node_problem, all_cuts, lp)
        if self._cutoff(bound):
            return []
        return self._branch(node, node_problem, lp, bound, local_new)

    def _cut_rounds(
        self, node: Node, node_problem: Problem, lp: LpResult, bound: float, local_new: List[Cut]
    ) -> Tuple[LpResult, float, bool]:
        for round_no in range(self.config.max_cut_rounds):
            candidates = self.svc.gmi.generate_round(node_problem, lp)
            if candidates:
                record_gmi_round(self.gmi_stats, {c.source_var: max(c.efficacy, 0.0) for c in candidates})
            self.stats.cuts_generated["gmi"] += len(candidates)
            candidates += self._pool_candidates(lp)
            if not candidates:
                break
            context = SelectionContext(node_problem, lp.x, self.incumbent, self.pseudo)
            selected = self.selector.select(candidates, context)
            if not selected:
                break
            for cut in selected:
                cut.local = node.depth > 0
            base = list(self.global_cuts) + list(node.local_cuts) + local_new
            trial = self._solve_lp(node_problem, base + selected, lp.basis)
            if trial.status == LpStatus.INFEASIBLE:
                self._infeasible(node)
                return lp, bound, True
            if not trial.is_optimal:
                logger.debug(f"Cut round {round_no} at node {node.id} discarded: LP {trial.status.value}.")
                break
            if node.depth == 0:
                self.global_cuts.extend(selected)
            else:
                local_new.extend(selected)
            for cut in selected:
                self.stats.cuts_kept[cut.origin.value] += 1
            gain = trial.objective - lp.objective
            lp = trial
            bound = max(bound, trial.objective)
            logger.debug(f"Cut round {round_no} at node {node.id}: {len(selected)} cuts, gain {gain:.3g}.")
            if gain < ROUND_GAIN_TOL:
                break
        return lp, bound, False

    def _pool_candidates(self, lp: LpResult) -> List[Cut]:
        active = {c.key() for c in self.global_cuts}
        out = []
        for cut in self.pool:
            if cut.key() in active:
                continue
            eff = efficacy(cut, lp.x)
            if eff > MIN_CUT_EFFICACY:
                out.append(replace(cut, efficacy=eff))
        return out

    def _lagromory(self, node: Node, node_problem: Problem, cuts: List[Cut], lp: LpResult, bound: float) -> float:
        service = self.svc.lagromory
        if not service.should_run(lp, self.config.lagromory):
            return bound
        lp_problem = node_problem.with_rows([c.to_row(f"cut{i}") for i, c in enumerate(cuts)])
        incumbent = self.incumbent.objective if self.incumbent else None
        result = service.relax_and_cut(lp_problem, lp, self.config.lagromory, incumbent)
        self.stats.cuts_generated["lagromory"] += len(result.cuts)
        if node.depth == 0:
            known = {c.key() for c in self.pool}
            self.pool.extend(c for c in result.cuts if c.key() not in known)
        return max(bound, result.best_bound)

    def _diving_enabled(self) -> bool:
        if not self.problem.indicators:
            return False
        return self.config.indicator_diving is not False

    def _dive(self, node_problem: Problem, cuts: List[Cut], lp: LpResult) -> None:
        dive_problem = node_problem.with_rows([c.to_row(f"cut{i}") for i, c in enumerate(cuts)])
        solution = self.svc.diving.dive(dive_problem, lp, self.config.dive)
        if solution is None:
            return
        solution = Solution(solution.values, self.problem.objective_value(solution.values))
        if self.svc.oracle.check_feasible(self.problem, solution, self.tol).feasible:
            self._new_incumbent(solution, "indicator diving")

    def _branch(self, node: Node, node_problem: Problem, lp: LpResult, bound: float, local_new: List[Cut]) -> List[Node]:
        x = lp.x
        candidates = branching_candidates(node_problem, x, self.tol)
        lower, upper = node_problem.lower, node_problem.upper
        if not candidates:
            violated = self.svc.diving.indicator_candidates(node_problem, x, lower, upper)
            if violated:
                z = min(ind.binvar for ind in violated)
                return [
                    self._child(node, lp, bound, local_new, z, 0.0, 0.0, Direction.DOWN, 0.0),
                    self._child(node, lp, bound, local_new, z, 1.0, 1.0, Direction.UP, 0.0),
                ]
            values = [float(round(v)) if j in self.problem.integer_set else float(v) for j, v in enumerate(x)]
            solution = Solution(values, self.problem.objective_value(values))
            if self.svc.oracle.check_feasible(self.problem, solution, self.tol).feasible:
                self._new_incumbent(solution, f"node {node.id}")
            else:
                logger.warning(f"Integral LP point at node {node.id} is not feasible; node dropped.")
            return []

        decision = self.rule.select(
            candidates,
            x,
            problem=node_problem,
            lp=lp,
            stats=self.gmi_stats,
            pseudo=self.pseudo,
            counters=self.counters,
        )
        var = decision.var
        f = fractionality(x[var])
        self.counters.record_branching(var)
        down = self._child(node, lp, bound, local_new, var, lower[var], math.floor(x[var]), Direction.DOWN, f)
        up = self._child(node, lp, bound, local_new, var, math.ceil(x[var]), upper[var], Direction.UP, 1.0 - f)
        for child in (down, up):
            lo, up_ = child.bounds[var]
            self.counters.record_child(var, infeasible=False, fixed=lo == up_)
        logger.debug(f"Node {node.id}: branching on {self.problem.var_label(var)} = {x[var]:.6g}.")
        return [up, down] if f >= 0.5 else [down, up]

    def _child(
        self,
        node: Node,
        lp: LpResult,
        bound: float,
        local_new: List[Cut],
        var: int,
        lo: float,
        up: float,
        direction: Direction,
        distance: float,
    ) -> Node:
        bounds = dict(node.bounds)
        bounds[var] = (float(lo), float(up))
        return Node(
            id=self._new_id(),
            depth=node.depth + 1,
            bounds=bounds,
            local_cuts=node.local_cuts + tuple(local_new),
            warm_basis=list(lp.basis),
            lower_bound=bound,
            parent=node.id,
            branch_var=var,
            branch_dir=direction,
            branch_dist=distance,
        )

    def _update_pseudocosts(self, node: Node, objective: float) -> None:
        if node.branch_var is None or not 0.0 < node.branch_dist < 1.0:
            return
        self.pseudo.update(node.branch_var, node.branch_dir, objective - node.lower_bound, node.branch_dist)

    def _infeasible(self, node: Node) -> None:
        if node.branch_var is not None:
            self.counters.record_child(node.branch_var, infeasible=True, fixed=False)


class SearchService:
    """Branch-and-cut solver built from the other services."""

    def __init__(
        self,
        simplex: Optional[SimplexService] = None,
        gmi: Optional[GmiService] = None,
        symmetry: Optional[SymmetryService] = None,
        diving: Optional[DivingService] = None,
        lagromory: Optional[LagromoryService] = None,
        oracle: Optional[OracleService] = None,
    ):
        self.simplex = simplex or SimplexService()
        self.gmi = gmi or GmiService(self.simplex)
        self.symmetry = symmetry or SymmetryService()
        self.oracle = oracle or OracleService(self.simplex)
        self.diving = diving or DivingService(self.simplex, self.oracle)
        self.lagromory = lagromory or LagromoryService(self.simplex, self.gmi)

    def solve(self, problem: Problem, config: SolverConfig = SolverConfig(), seed: int = 0) -> SolveResult:
        """
        Solves a problem to optimality or until a limit is hit.

        Returns:
            A SolveResult whose objective values are internal (minimization) values;
            use ``problem.reported_objective`` for the original sense.
        """
        tolerances = config.tolerances
        if self.gmi.tol != tolerances:
            self.gmi.tol = tolerances
        return _SearchRun(self, problem, config, seed).execute()
