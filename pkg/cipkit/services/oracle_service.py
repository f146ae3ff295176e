"""
This module defines the OracleService: exact feasibility checks and
brute-force optima used to validate solutions, cuts and bounds.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..config import BRUTE_FORCE_LIMIT
from ..exceptions import BudgetExceededError, ModelError
from ..models import Problem, Solution, Tolerances
from .simplex_service import LpStatus, SimplexService

logger = logging.getLogger(__name__)


@dataclass
class Violation:
    kind: str
    name: str
    magnitude: float


@dataclass
class FeasibilityReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    @property
    def max_violation(self) -> float:
        return max((v.magnitude for v in self.violations), default=0.0)

    def of_kind(self, kind: str) -> List[Violation]:
        return [v for v in self.violations if v.kind == kind]


@dataclass
class BruteForceResult:
    status: str
    solution: Optional[Solution] = None

    @property
    def objective(self) -> float:
        if self.solution is not None:
            return self.solution.objective
        return math.inf if self.status == "infeasible" else -math.inf


class OracleService:
    """Reference checks that do not rely on the branch-and-cut machinery."""

    def __init__(self, simplex: Optional[SimplexService] = None):
        self.simplex = simplex or SimplexService()

    def check_feasible(
        self,
        problem: Problem,
        solution: Solution,
        tol: Tolerances = Tolerances(),
        include_signomials: bool = False,
    ) -> FeasibilityReport:
        """
        Lists every violated bound, row, integrality requirement and indicator.

        An indicator is violated iff s[z] <= integrality tolerance and
        s[x] > feasibility tolerance; its magnitude is s[x].
        """
        report = FeasibilityReport()
        x = solution.values
        if len(x) != problem.num_vars:
            report.violations.append(Violation("length", "values", abs(len(x) - problem.num_vars)))
            return report

        for j in range(problem.num_vars):
            label = problem.var_label(j)
            if x[j] < problem.lower[j] - tol.feasibility:
                report.violations.append(Violation("bound", label, problem.lower[j] - x[j]))
            if x[j] > problem.upper[j] + tol.feasibility:
                report.violations.append(Violation("bound", label, x[j] - problem.upper[j]))
            if j in problem.integer_set and not tol.is_integral(x[j]):
                report.violations.append(Violation("integrality", label, abs(x[j] - round(x[j]))))

        for i, row in enumerate(problem.rows):
            activity = row.activity(x)
            name = row.name or f"r{i}"
            if activity < row.lhs - tol.feasibility:
                report.violations.append(Violation("row", name, row.lhs - activity))
            if activity > row.rhs + tol.feasibility:
                report.violations.append(Violation("row", name, activity - row.rhs))

        for ind in problem.indicators:
            if x[ind.binvar] <= tol.integrality and x[ind.var] > tol.feasibility:
                report.violations.append(Violation("indicator", ind.name or problem.var_label(ind.binvar), x[ind.var]))

        if include_signomials:
            for sig in problem.signomials:
                if any(x[j] <= 0 for j in sig.var_indices):
                    report.violations.append(Violation("signomial", sig.name, math.inf))
                    continue
                gap = x[sig.aux] - sig.value(x)
                excess = {"eq": abs(gap), "ge": -gap, "le": gap}[sig.sense]
                if excess > tol.feasibility:
                    report.violations.append(Violation("signomial", sig.name, excess))
        return report

    def brute_force_optimum(self, problem: Problem, limit: int = BRUTE_FORCE_LIMIT) -> BruteForceResult:
        """
        Enumerates every integer assignment and optimizes the continuous rest by LP.

        Raises:
            ModelError: If an integer variable has an infinite bound.
            BudgetExceededError: If the integer lattice has more than ``limit`` points.
        """
        ints = sorted(problem.integer_set)
        size = problem.integer_lattice_size()
        if math.isinf(size):
            raise ModelError("Brute force needs finite bounds on every integer variable.")
        if size > limit:
            raise BudgetExceededError(f"Integer lattice of {size:.0f} points exceeds the limit of {limit}.")

        pure_integer = len(ints) == problem.num_vars
        ranges = [range(int(problem.lower[j]), int(problem.upper[j]) + 1) for j in ints]
        best: Optional[Solution] = None
        unbounded = False
        tol = Tolerances()

        for assignment in itertools.product(*ranges):
            if pure_integer:
                candidate = Solution(list(assignment), problem.objective_value(assignment))
                if not self.check_feasible(problem, candidate, tol).feasible:
                    continue
            else:
                fixed = self._fixed_problem(problem, ints, assignment)
                if fixed is None:
                    continue
                lp = self.simplex.solve_lp(fixed)
                if lp.status == LpStatus.UNBOUNDED:
                    unbounded = True
                    break
                if lp.status != LpStatus.OPTIMAL:
                    continue
                values = np.asarray(lp.x, dtype=float)
                for j, v in zip(ints, assignment):
                    values[j] = v
                candidate = Solution(list(values), problem.objective_value(values))
            if best is None or candidate.objective < best.objective - 1e-12:
                best = candidate

        if unbounded:
            return BruteForceResult("unbounded")
        if best is None:
            logger.debug(f"Brute force found no feasible point for {problem.name or '<anonymous>'}.")
            return BruteForceResult("infeasible")
        return BruteForceResult("optimal", best)

    @staticmethod
    def _fixed_problem(problem: Problem, ints: List[int], assignment) -> Optional[Problem]:
        lower = list(problem.lower)
        upper = list(problem.upper)
        for j, v in zip(ints, assignment):
            lower[j] = upper[j] = float(v)
        for ind in problem.indicators:
            if upper[ind.binvar] == 0.0:
                upper[ind.var] = min(upper[ind.var], 0.0)
                if lower[ind.var] > upper[ind.var]:
                    return None
        return problem.with_bounds(lower, upper)
