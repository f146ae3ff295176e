"""
This module defines the GmiService, which derives Gomory mixed-integer cuts
from optimal simplex tableau rows.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from ..config import MAX_CUT_DYNAMISM, MIN_CUT_EFFICACY
from ..exceptions import CutError, LpError
from ..models import Cut, CutOrigin, Problem, Tolerances
from .simplex_service import LpData, LpResult, SimplexService, TableauRow, VarStatus

logger = logging.getLogger(__name__)

COEF_EPS = 1e-12


@dataclass(frozen=True)
class SplitDisjunction:
    """The disjunction pi.x <= pi0 or pi.x >= pi0 + 1 with integral (pi, pi0)."""

    pi: Dict[int, int]
    pi0: int

    def value(self, x: Sequence[float]) -> float:
        return float(sum(p * x[j] for j, p in self.pi.items()))

    def strictly_inside(self, x: Sequence[float]) -> bool:
        v = self.value(x)
        return self.pi0 < v < self.pi0 + 1


def efficacy(cut: Cut, x_bar: Sequence[float]) -> float:
    """Signed distance (a.x - rhs) / ||a|| of x_bar beyond the cut hyperplane."""
    norm = cut.norm()
    if norm <= 0.0:
        raise CutError("Efficacy of a cut with zero norm is undefined.")
    return (cut.activity(x_bar) - cut.rhs) / norm


def normalize_round(efficacies: Sequence[float]) -> List[float]:
    """Divides every efficacy by the largest one of the round; an all-zero round stays zero."""
    if not efficacies:
        raise CutError("Cannot normalize an empty separation round.")
    if min(efficacies) < 0:
        raise CutError("Round efficacies must be nonnegative.")
    top = max(efficacies)
    if top <= 0.0:
        return [0.0 for _ in efficacies]
    return [e / top for e in efficacies]


class GmiService:
    """Builds elementary splits and GMI cuts."""

    def __init__(self, simplex: Optional[SimplexService] = None, tol: Tolerances = Tolerances()):
        self.simplex = simplex or SimplexService()
        self.tol = tol

    def elementary_split(self, problem: Problem, i: int, x_bar: Sequence[float]) -> SplitDisjunction:
        if i not in problem.integer_set:
            raise CutError(f"Variable {problem.var_label(i)} is not integer.")
        if self.tol.is_integral(x_bar[i]):
            raise CutError(f"Variable {problem.var_label(i)} is integral at {x_bar[i]}.")
        return SplitDisjunction({i: 1}, int(math.floor(x_bar[i])))

    def gmi_from_row(self, row: TableauRow, lp: LpData, x_bar: Sequence[float]) -> Optional[Cut]:
        """
        Derives the GMI cut of a tableau row whose basic column is integer.

        Nonbasic columns are complemented to their active bound, the cut is
        formed in >= 1 form, slacks are substituted by their row activities and
        the result is stored as a <= cut over structural variables, scaled to a
        largest coefficient of 1.

        Returns:
            The cut, or None if the row is not usable or the cut is numerically
            unsafe (coefficient dynamism above the limit).
        """
        if not lp.integer_mask[row.basic_var]:
            return None
        f0 = row.rhs_value - math.floor(row.rhs_value)
        if f0 < self.tol.integrality or f0 > 1 - self.tol.integrality:
            return None

        n = lp.num_structural
        coefs = np.zeros(n)
        rhs_ge = 1.0
        for j, alpha in row.nonbasic_coeffs.items():
            status = row.nonbasic_status[j]
            if status == VarStatus.ZERO:
                logger.debug(f"GMI on column {row.basic_var} aborted: free nonbasic column {j}.")
                return None
            if status == VarStatus.LOWER:
                sigma, bound = 1.0, lp.lower[j]
            else:
                sigma, bound = -1.0, lp.upper[j]
            a = alpha * sigma
            if lp.integer_mask[j] and float(bound).is_integer():
                fj = a - math.floor(a)
                if fj < COEF_EPS or fj > 1 - COEF_EPS:
                    continue
                g = fj / f0 if fj <= f0 else (1 - fj) / (1 - f0)
            else:
                g = a / f0 if a > 0 else -a / (1 - f0)
            if g <= COEF_EPS:
                continue
            # g * t with t = sigma * (col - bound)
            rhs_ge += g * sigma * bound
            if lp.is_slack(j):
                coefs += g * sigma * lp.matrix[j - n, :n]
            else:
                coefs[j] += g * sigma

        nonzero = np.abs(coefs) > COEF_EPS * max(1.0, float(np.max(np.abs(coefs))) if coefs.size else 1.0)
        if not nonzero.any():
            return None
        magnitudes = np.abs(coefs[nonzero])
        if magnitudes.max() / magnitudes.min() > MAX_CUT_DYNAMISM:
            logger.debug(f"GMI on column {row.basic_var} rejected: dynamism {magnitudes.max() / magnitudes.min():.3g}.")
            return None

        scale = magnitudes.max()
        cut_coeffs = tuple((int(j), float(-coefs[j] / scale)) for j in np.flatnonzero(nonzero))
        cut = Cut(
            coeffs=cut_coeffs,
            rhs=float(-rhs_ge / scale),
            origin=CutOrigin.GMI,
            source_var=row.basic_var,
        )
        cut.efficacy = efficacy(cut, x_bar)
        cut.density = cut.nnz / max(n, 1)
        if cut.efficacy <= MIN_CUT_EFFICACY:
            return None
        return cut

    def fractional_candidates(self, problem: Problem, result: LpResult) -> List[int]:
        """Basic integer structural variables with fractional LP value, by index."""
        return [
            j
            for j in sorted(problem.integer_set)
            if result.basis[j] == VarStatus.BASIC and not self.tol.is_integral(result.x[j])
        ]

    def cut_for_var(self, problem: Problem, result: LpResult, var: int) -> Optional[Cut]:
        try:
            row = self.simplex.tableau_row(result, var)
        except LpError:
            return None
        return self.gmi_from_row(row, result.lp, result.x)

    def generate_round(
        self, problem: Problem, result: LpResult, candidates: Optional[Iterable[int]] = None
    ) -> List[Cut]:
        """Generates one GMI cut per fractional basic integer variable (or per given candidate)."""
        if not result.is_optimal:
            return []
        vars_ = self.fractional_candidates(problem, result) if candidates is None else list(candidates)
        cuts = []
        for j in vars_:
            cut = self.cut_for_var(problem, result, j)
            if cut is not None:
                cuts.append(cut)
        logger.debug(f"GMI round: {len(cuts)} cuts from {len(vars_)} candidates.")
        return cuts
