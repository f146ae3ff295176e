"""
This module defines the SimplexService, a dense bounded-variable primal simplex.

Every row lhs <= a.x <= rhs is written as a.x - s = 0 with a slack s bounded by
[lhs, rhs]; the column space is therefore [A, -I] and the slack basis is always
a valid starting point.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..config import LP_ITER_LIMIT, MAX_CONDITION, REFACTOR_FREQ
from ..exceptions import NotBasicError, NotOptimalError
from ..models import Problem, Tolerances

logger = logging.getLogger(__name__)

PRIMAL_TOL = 1e-9
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-9
RATIO_TIE_TOL = 1e-12


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL_ERROR = "numerical_error"


class VarStatus(str, Enum):
    BASIC = "basic"
    LOWER = "at-lower"
    UPPER = "at-upper"
    ZERO = "zero"  # free nonbasic held at 0


@dataclass
class LpData:
    """Column-space view of a problem: costs, [A, -I] and bounds of all columns."""

    num_structural: int
    num_rows: int
    cost: np.ndarray
    matrix: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer_mask: np.ndarray

    @classmethod
    def from_problem(cls, problem: Problem) -> "LpData":
        n, m = problem.num_vars, len(problem.rows)
        a = np.zeros((m, n))
        for i, row in enumerate(problem.rows):
            for j, value in row.coeffs:
                a[i, j] = value
        matrix = np.hstack([a, -np.eye(m)]) if m else np.zeros((0, n))
        cost = np.concatenate([np.asarray(problem.objective, dtype=float), np.zeros(m)])
        lower = np.array(list(problem.lower) + [row.lhs for row in problem.rows], dtype=float)
        upper = np.array(list(problem.upper) + [row.rhs for row in problem.rows], dtype=float)
        integer_mask = np.array(
            [j in problem.integer_set for j in range(n)]
            + [row.is_integral(problem.integer_set) for row in problem.rows],
            dtype=bool,
        )
        return cls(n, m, cost, matrix, lower, upper, integer_mask)

    @property
    def num_cols(self) -> int:
        return self.num_structural + self.num_rows

    def is_slack(self, k: int) -> bool:
        return k >= self.num_structural


@dataclass
class LpResult:
    status: LpStatus
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    basis: List[VarStatus]
    objective: float
    iterations: int
    activities: np.ndarray = field(default_factory=lambda: np.zeros(0))
    basic_vars: List[int] = field(default_factory=list)
    binv: Optional[np.ndarray] = None
    lp: Optional[LpData] = None

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    def column_values(self) -> np.ndarray:
        """Values of all columns: structurals followed by row activities."""
        return np.concatenate([self.x, self.activities])

    def dual_objective(self) -> float:
        """Dual bound sum_k r_k * bound_k implied by the reduced costs of an optimal basis."""
        if self.lp is None:
            return float("nan")
        total = 0.0
        for k, r in enumerate(self.reduced_costs):
            if abs(r) <= DUAL_TOL:
                continue
            bound = self.lp.lower[k] if r > 0 else self.lp.upper[k]
            total += r * bound
        return float(total)


@dataclass
class TableauRow:
    """x_B = rhs_value - sum_j coeffs[j] * (x_j - values[j]) over nonbasic columns j."""

    basic_var: int
    rhs_value: float
    nonbasic_coeffs: Dict[int, float]
    nonbasic_status: Dict[int, VarStatus]
    nonbasic_values: Dict[int, float]
    num_structural: int

    def evaluate(self, column_values: Sequence[float]) -> float:
        return self.rhs_value - sum(
            a * (column_values[j] - self.nonbasic_values[j]) for j, a in self.nonbasic_coeffs.items()
        )


def _default_status(lower: float, upper: float) -> VarStatus:
    if np.isfinite(lower):
        return VarStatus.LOWER
    if np.isfinite(upper):
        return VarStatus.UPPER
    return VarStatus.ZERO


def _sanitize_status(status: VarStatus, lower: float, upper: float) -> VarStatus:
    if status == VarStatus.LOWER and not np.isfinite(lower):
        return _default_status(lower, upper)
    if status == VarStatus.UPPER and not np.isfinite(upper):
        return _default_status(lower, upper)
    if status == VarStatus.ZERO:
        return _default_status(lower, upper)
    return status


class _SimplexRun:
    """Mutable state of one simplex solve."""

    def __init__(self, lp: LpData, refactor_freq: int, max_condition: float, bland_after: int):
        self.lp = lp
        self.refactor_freq = refactor_freq
        self.max_condition = max_condition
        self.bland_after = bland_after
        self.status: List[VarStatus] = []
        self.basis: List[int] = []
        self.x = np.zeros(lp.num_cols)
        self.binv = np.zeros((lp.num_rows, lp.num_rows))
        self.since_refactor = 0
        self.iterations = 0

    def set_basis(self, warm: Optional[Sequence[VarStatus]]) -> bool:
        lp = self.lp
        if warm is not None:
            statuses = [VarStatus(s) for s in warm]
            if len(statuses) < lp.num_cols:
                statuses += [VarStatus.BASIC] * (lp.num_cols - len(statuses))
            basic_count = sum(1 for s in statuses if s == VarStatus.BASIC)
            if len(statuses) == lp.num_cols and basic_count == lp.num_rows:
                self._install(statuses)
                if self.refactor():
                    return True
            logger.debug("Warm basis rejected, falling back to slack basis.")
        statuses = [_default_status(lp.lower[k], lp.upper[k]) for k in range(lp.num_structural)]
        statuses += [VarStatus.BASIC] * lp.num_rows
        self._install(statuses)
        return self.refactor()

    def _install(self, statuses: List[VarStatus]) -> None:
        lp = self.lp
        self.status = [
            s if s == VarStatus.BASIC else _sanitize_status(s, lp.lower[k], lp.upper[k])
            for k, s in enumerate(statuses)
        ]
        self.basis = [k for k, s in enumerate(self.status) if s == VarStatus.BASIC]
        self.x = np.zeros(lp.num_cols)
        for k, s in enumerate(self.status):
            if s == VarStatus.LOWER:
                self.x[k] = lp.lower[k]
            elif s == VarStatus.UPPER:
                self.x[k] = lp.upper[k]

    def refactor(self) -> bool:
        m = self.lp.num_rows
        self.since_refactor = 0
        if m == 0:
            self.binv = np.zeros((0, 0))
            return True
        b = self.lp.matrix[:, self.basis]
        condition = np.linalg.cond(b)
        if not np.isfinite(condition) or condition > self.max_condition:
            logger.warning(f"Basis condition estimate {condition:.3g} exceeds {self.max_condition:.3g}.")
            return False
        self.binv = np.linalg.inv(b)
        nonbasic = [k for k, s in enumerate(self.status) if s != VarStatus.BASIC]
        rhs = self.lp.matrix[:, nonbasic] @ self.x[nonbasic] if nonbasic else np.zeros(m)
        self.x[self.basis] = -self.binv @ rhs
        return True

    def _eligible(self, d: np.ndarray) -> np.ndarray:
        lp = self.lp
        status = np.array([s.value for s in self.status])
        movable = lp.lower < lp.upper
        at_lower = (status == VarStatus.LOWER.value) & (d < -DUAL_TOL)
        at_upper = (status == VarStatus.UPPER.value) & (d > DUAL_TOL)
        at_zero = (status == VarStatus.ZERO.value) & (np.abs(d) > DUAL_TOL)
        return movable & (at_lower | at_upper | at_zero)

    def run(self, iter_limit: int) -> LpStatus:
        lp = self.lp
        m = lp.num_rows
        degenerate = 0
        bland = False

        while True:
            if self.since_refactor >= self.refactor_freq and not self.refactor():
                return LpStatus.NUMERICAL_ERROR

            xb = self.x[self.basis]
            lo_b, up_b = lp.lower[self.basis], lp.upper[self.basis]
            below = xb < lo_b - PRIMAL_TOL
            above = xb > up_b + PRIMAL_TOL
            phase_one = bool(below.any() or above.any())
            if phase_one:
                cost_b = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                cost = np.zeros(lp.num_cols)
                cost[self.basis] = cost_b
            else:
                cost_b = lp.cost[self.basis]
                cost = lp.cost
            y = cost_b @ self.binv if m else np.zeros(0)
            d = cost - (y @ lp.matrix if m else np.zeros(lp.num_cols))

            eligible = self._eligible(d)
            if not eligible.any():
                return LpStatus.INFEASIBLE if phase_one else LpStatus.OPTIMAL
            if self.iterations >= iter_limit:
                return LpStatus.ITERATION_LIMIT

            if bland:
                k = int(np.flatnonzero(eligible)[0])
            else:
                k = int(np.argmax(np.where(eligible, np.abs(d), -1.0)))
            direction = 1.0 if d[k] < 0 else -1.0
            alpha = self.binv @ lp.matrix[:, k] if m else np.zeros(0)
            delta = -direction * alpha

            theta = np.inf
            leave_pos: Optional[int] = None
            leave_status = VarStatus.LOWER
            leave_bound = 0.0
            for i in range(m):
                di = delta[i]
                if abs(di) <= PIVOT_TOL:
                    continue
                if di > 0:
                    if below[i]:
                        bound, status = lo_b[i], VarStatus.LOWER
                    elif above[i] or not np.isfinite(up_b[i]):
                        continue
                    else:
                        bound, status = up_b[i], VarStatus.UPPER
                else:
                    if above[i]:
                        bound, status = up_b[i], VarStatus.UPPER
                    elif below[i] or not np.isfinite(lo_b[i]):
                        continue
                    else:
                        bound, status = lo_b[i], VarStatus.LOWER
                t = max((bound - xb[i]) / di, 0.0)
                better = t < theta - RATIO_TIE_TOL
                if not better and leave_pos is not None and abs(t - theta) <= RATIO_TIE_TOL:
                    if bland:
                        better = self.basis[i] < self.basis[leave_pos]
                    else:
                        current = abs(delta[leave_pos])
                        better = abs(di) > current or (abs(di) == current and self.basis[i] < self.basis[leave_pos])
                if better:
                    theta, leave_pos, leave_status, leave_bound = t, i, status, bound

            flip = np.inf
            if self.status[k] != VarStatus.ZERO and np.isfinite(lp.lower[k]) and np.isfinite(lp.upper[k]):
                flip = lp.upper[k] - lp.lower[k]

            if np.isfinite(flip) and flip <= theta:
                theta = flip
                self.x[k] = lp.upper[k] if direction > 0 else lp.lower[k]
                self.status[k] = VarStatus.UPPER if direction > 0 else VarStatus.LOWER
                self.x[self.basis] = xb + theta * delta
            elif leave_pos is None:
                if phase_one:
                    logger.warning("Phase one found an unbounded improving ray; treating as numerical failure.")
                    return LpStatus.NUMERICAL_ERROR
                return LpStatus.UNBOUNDED
            else:
                self.x[self.basis] = xb + theta * delta
                self.x[k] += direction * theta
                leaving = self.basis[leave_pos]
                self.x[leaving] = leave_bound
                self.status[leaving] = leave_status
                self.status[k] = VarStatus.BASIC
                self.basis[leave_pos] = k
                pivot_row = self.binv[leave_pos] / alpha[leave_pos]
                self.binv -= np.outer(alpha, pivot_row)
                self.binv[leave_pos] = pivot_row
                self.since_refactor += 1

            if theta <= RATIO_TIE_TOL:
                degenerate += 1
                if degenerate > self.bland_after and not bland:
                    logger.debug("Switching to Bland's rule after repeated degenerate pivots.")
                    bland = True
            else:
                degenerate = 0
            self.iterations += 1


class SimplexService:
    """Solves LP relaxations and exposes tableau rows of the optimal basis."""

    def __init__(
        self,
        iter_limit: int = LP_ITER_LIMIT,
        refactor_freq: int = REFACTOR_FREQ,
        max_condition: float = MAX_CONDITION,
        bland_after: int = 50,
    ):
        self.iter_limit = iter_limit
        self.refactor_freq = refactor_freq
        self.max_condition = max_condition
        self.bland_after = bland_after

    def solve_lp(
        self,
        problem: Problem,
        warm_basis: Optional[Sequence[VarStatus]] = None,
        iter_limit: Optional[int] = None,
    ) -> LpResult:
        """
        Solves the LP relaxation of a problem (integrality, indicators and
        signomials are ignored; rows added as cuts are part of ``problem.rows``).

        Args:
            problem: The problem whose relaxation is solved.
            warm_basis: Optional per-column statuses of an earlier basis. Columns of
                rows appended since then start basic.
            iter_limit: Pivot limit; defaults to the service setting.

        Returns:
            An LpResult. Numerical trouble is reported via ``numerical_error``.
        """
        lp = LpData.from_problem(problem)
        run = _SimplexRun(lp, self.refactor_freq, self.max_condition, self.bland_after)
        if not run.set_basis(warm_basis):
            return self._result(run, LpStatus.NUMERICAL_ERROR)
        status = run.run(self.iter_limit if iter_limit is None else iter_limit)
        if status == LpStatus.OPTIMAL and run.since_refactor > 0 and not run.refactor():
            status = LpStatus.NUMERICAL_ERROR
        result = self._result(run, status)
        logger.debug(f"LP {problem.name or '<anonymous>'}: {status.value} after {run.iterations} iterations.")
        return result

    def _result(self, run: _SimplexRun, status: LpStatus) -> LpResult:
        lp = run.lp
        n, m = lp.num_structural, lp.num_rows
        x = run.x[:n].copy()
        activities = run.x[n:].copy()
        duals = np.zeros(m)
        reduced = np.zeros(lp.num_cols)
        if status == LpStatus.OPTIMAL:
            y = lp.cost[run.basis] @ run.binv if m else np.zeros(0)
            reduced = lp.cost - (y @ lp.matrix if m else np.zeros(lp.num_cols))
            reduced[run.basis] = 0.0
            duals = y
            objective = float(lp.cost[:n] @ x)
        elif status == LpStatus.INFEASIBLE:
            objective = float("inf")
        elif status == LpStatus.UNBOUNDED:
            objective = float("-inf")
        else:
            objective = float(lp.cost[:n] @ x) if np.all(np.isfinite(x)) else float("nan")
        return LpResult(
            status=status,
            x=x,
            duals=duals,
            reduced_costs=reduced,
            basis=list(run.status),
            objective=objective,
            iterations=run.iterations,
            activities=activities,
            basic_vars=list(run.basis),
            binv=run.binv.copy() if status == LpStatus.OPTIMAL else None,
            lp=lp,
        )

    def tableau_row(self, result: LpResult, basic_var: int) -> TableauRow:
        """
        Returns the row of B^-1 [A, -I] for a basic column.

        Raises:
            NotOptimalError: If the result carries no optimal basis.
            NotBasicError: If ``basic_var`` is not basic.
        """
        if result.status != LpStatus.OPTIMAL or result.binv is None or result.lp is None:
            raise NotOptimalError(f"Tableau rows need an optimal LP, got {result.status.value}.")
        if basic_var < 0 or basic_var >= len(result.basis) or result.basis[basic_var] != VarStatus.BASIC:
            raise NotBasicError(f"Column {basic_var} is not basic.")
        position = result.basic_vars.index(basic_var)
        alpha = result.binv[position] @ result.lp.matrix
        values = result.column_values()
        coeffs: Dict[int, float] = {}
        statuses: Dict[int, VarStatus] = {}
        nonbasic_values: Dict[int, float] = {}
        for k, status in enumerate(result.basis):
            if status == VarStatus.BASIC or abs(alpha[k]) <= 1e-12:
                continue
            coeffs[k] = float(alpha[k])
            statuses[k] = status
            nonbasic_values[k] = float(values[k])
        return TableauRow(
            basic_var=basic_var,
            rhs_value=float(values[basic_var]),
            nonbasic_coeffs=coeffs,
            nonbasic_status=statuses,
            nonbasic_values=nonbasic_values,
            num_structural=result.lp.num_structural,
        )

    def dual_degeneracy(self, result: LpResult, tol: Tolerances = Tolerances()) -> float:
        """Fraction of nonbasic columns whose reduced cost is zero within tol.zero."""
        if result.status != LpStatus.OPTIMAL:
            raise NotOptimalError(f"Dual degeneracy needs an optimal LP, got {result.status.value}.")
        nonbasic = [k for k, s in enumerate(result.basis) if s != VarStatus.BASIC]
        if not nonbasic:
            return 0.0
        zero = sum(1 for k in nonbasic if abs(result.reduced_costs[k]) <= tol.zero)
        return zero / len(nonbasic)
