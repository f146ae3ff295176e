"""
This module defines the DivingService: a depth-first LP dive that first
settles violated indicator constraints and then rounds the remaining
fractional integer variables.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..exceptions import ModelError
from ..models import DiveConfig, IndicatorCons, Problem, Solution, Tolerances
from .oracle_service import OracleService
from .propagation_service import propagate_bounds
from .simplex_service import LpResult, LpStatus, SimplexService

logger = logging.getLogger(__name__)


def indicator_score(x_hat: float, ell: float, u: float) -> float:
    """-1 if x_hat is 0 or inside [ell, u]; 100 * (ell - x_hat) / ell if 0 < x_hat < u; -1 otherwise."""
    if ell <= 0:
        raise ModelError(f"Activation bound must be positive, got {ell}.")
    if x_hat == 0 or ell <= x_hat <= u:
        return -1.0
    if 0 < x_hat < u:
        return 100.0 * (ell - x_hat) / ell
    return -1.0


@dataclass
class DiveDecision:
    var: int
    kind: str  # "fix" sets both bounds, "down"/"up" change one bound
    value: float
    score: float = 0.0

    def flipped(self) -> "DiveDecision":
        if self.kind == "fix":
            return DiveDecision(self.var, "fix", 1.0 - self.value, self.score)
        if self.kind == "down":
            return DiveDecision(self.var, "up", self.value + 1.0, self.score)
        return DiveDecision(self.var, "down", self.value - 1.0, self.score)

    def apply(self, lower: List[float], upper: List[float]) -> None:
        if self.kind == "fix":
            lower[self.var] = upper[self.var] = self.value
        elif self.kind == "down":
            upper[self.var] = min(upper[self.var], self.value)
        else:
            lower[self.var] = max(lower[self.var], self.value)


def choose_and_fix(candidates: Sequence[IndicatorCons], x: Sequence[float], upper: Sequence[float]) -> DiveDecision:
    """Picks the candidate with the highest score (smallest z on ties); z = 1 iff x_hat >= ell / 2."""
    if not candidates:
        raise ModelError("choose_and_fix needs at least one candidate.")
    best: Optional[Tuple[float, int, IndicatorCons]] = None
    for ind in candidates:
        phi = indicator_score(x[ind.var], ind.activation, upper[ind.var])
        if best is None or phi > best[0] or (phi == best[0] and ind.binvar < best[1]):
            best = (phi, ind.binvar, ind)
    phi, _, ind = best
    value = 1.0 if x[ind.var] >= 0.5 * ind.activation else 0.0
    return DiveDecision(ind.binvar, "fix", value, phi)


def farkas_rounding(
    problem: Problem, x: Sequence[float], lower: Sequence[float], upper: Sequence[float], tol: Tolerances
) -> Optional[DiveDecision]:
    """Rounds the fractional variable with the largest |c_j| towards its objective-improving side."""
    best: Optional[DiveDecision] = None
    for j in sorted(problem.integer_set):
        if lower[j] == upper[j] or tol.is_integral(x[j]):
            continue
        c = problem.objective[j]
        frac = x[j] - math.floor(x[j])
        if c > 0 or (c == 0 and frac < 0.5):
            decision = DiveDecision(j, "down", float(math.floor(x[j])), abs(c))
        else:
            decision = DiveDecision(j, "up", float(math.ceil(x[j])), abs(c))
        if best is None or decision.score > best.score:
            best = decision
    return best


class DivingService:
    """Runs indicator diving from an optimal LP."""

    def __init__(
        self,
        simplex: Optional[SimplexService] = None,
        oracle: Optional[OracleService] = None,
        tol: Tolerances = Tolerances(),
    ):
        self.simplex = simplex or SimplexService()
        self.oracle = oracle or OracleService(self.simplex)
        self.tol = tol

    def indicator_candidates(
        self, problem: Problem, x: Sequence[float], lower: Sequence[float], upper: Sequence[float]
    ) -> List[IndicatorCons]:
        """Violated indicators whose z is integral in the LP and not yet fixed."""
        return [
            ind
            for ind in problem.indicators
            if x[ind.binvar] <= self.tol.integrality
            and x[ind.var] > self.tol.feasibility
            and lower[ind.binvar] < upper[ind.binvar]
        ]

    def dive(self, problem: Problem, root_lp: LpResult, cfg: DiveConfig = DiveConfig()) -> Optional[Solution]:
        """
        Dives from the root LP and returns the first integral solution that passes
        the feasibility check, or None when the dive fails.

        Backtracking happens at most once per dive: the first infeasible child
        flips its fixing, any later infeasibility ends the dive.
        """
        if not root_lp.is_optimal:
            return None
        lower, upper = list(problem.lower), list(problem.upper)
        lp = root_lp
        iterations = 0
        last: Optional[Tuple[DiveDecision, List[float], List[float]]] = None
        flipped = False

        for depth in range(cfg.max_depth + 1):
            if not lp.is_optimal:
                if lp.status != LpStatus.INFEASIBLE or not cfg.backtrack or last is None or flipped:
                    logger.debug(f"Dive aborted at depth {depth}: LP {lp.status.value}.")
                    return None
                decision, saved_lower, saved_upper = last
                lower, upper = list(saved_lower), list(saved_upper)
                alternative = decision.flipped()
                alternative.apply(lower, upper)
                flipped = True
                lp = self._resolve(problem, lower, upper, lp)
                iterations += lp.iterations
                continue

            solution = self._integral_solution(problem, lp.x)
            if solution is not None:
                logger.info(f"Dive found a solution with objective {solution.objective:.6g} at depth {depth}.")
                return solution
            if depth == cfg.max_depth or iterations >= cfg.lp_iter_budget:
                break

            candidates = self.indicator_candidates(problem, lp.x, lower, upper)
            if candidates:
                decision = choose_and_fix(candidates, lp.x, upper)
            else:
                decision = farkas_rounding(problem, lp.x, lower, upper, self.tol)
            if decision is None:
                logger.debug("Dive stuck: integral LP point that is not feasible and nothing to fix.")
                return None

            last = (decision, list(lower), list(upper))
            decision.apply(lower, upper)
            lp = self._resolve(problem, lower, upper, lp)
            iterations += lp.iterations
        return None

    def _resolve(self, problem: Problem, lower: List[float], upper: List[float], previous: LpResult) -> LpResult:
        if not propagate_bounds(problem, lower, upper, self.tol):
            return LpResult(LpStatus.INFEASIBLE, previous.x, previous.duals, previous.reduced_costs, previous.basis,
                            math.inf, 0)
        warm = previous.basis if previous.is_optimal else None
        return self.simplex.solve_lp(problem.with_bounds(lower, upper), warm_basis=warm)

    def _integral_solution(self, problem: Problem, x: Sequence[float]) -> Optional[Solution]:
        if any(not self.tol.is_integral(x[j]) for j in problem.integer_set):
            return None
        values = [float(round(v)) if j in problem.integer_set else float(v) for j, v in enumerate(x)]
        candidate = Solution(values, problem.objective_value(values))
        if self.oracle.check_feasible(problem, candidate, self.tol).feasible:
            return candidate
        return None
