"""
This module defines branching statistics and the branching rules: most
fractional, GMI branching and the hybrid weighted-sum rule.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from ..exceptions import ModelError
from ..models import Cut, HybridBranchWeights, Problem, Tolerances
from .gmi_service import GmiService, normalize_round
from .simplex_service import LpResult, VarStatus

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-6
TIE_TOL = 1e-12


class Direction(str, Enum):
    DOWN = "down"
    UP = "up"


def fractionality(value: float) -> float:
    return value - math.floor(value)


@dataclass
class GmiEffStats:
    """Running average and last value of normalized GMI efficacies per variable."""

    avg: Dict[int, float] = field(default_factory=dict)
    last: Dict[int, float] = field(default_factory=dict)
    count: Dict[int, int] = field(default_factory=dict)

    def record(self, var: int, normalized: float) -> None:
        if not 0.0 <= normalized <= 1.0:
            raise ModelError(f"Normalized efficacy {normalized} outside [0, 1].")
        n = self.count.get(var, 0) + 1
        previous = self.avg.get(var, 0.0)
        self.count[var] = n
        self.avg[var] = previous + (normalized - previous) / n
        self.last[var] = normalized


class PseudoCostStore:
    """Per-variable, per-direction objective gain per unit of fractionality."""

    def __init__(self):
        self._sum: Dict[Tuple[int, Direction], float] = defaultdict(float)
        self._count: Dict[Tuple[int, Direction], int] = defaultdict(int)

    def update(self, var: int, direction: Direction, gain: float, frac: float) -> None:
        if not 0.0 < frac < 1.0:
            raise ModelError(f"Fractionality {frac} must lie in (0, 1).")
        key = (var, Direction(direction))
        self._sum[key] += max(gain, 0.0) / frac
        self._count[key] += 1

    def count(self, var: int, direction: Direction) -> int:
        return self._count.get((var, Direction(direction)), 0)

    def estimate(self, var: int, direction: Direction) -> float:
        """Average per-unit gain; uninitialized entries use the mean over initialized ones (1 if none)."""
        key = (var, Direction(direction))
        if self._count.get(key, 0) > 0:
            return self._sum[key] / self._count[key]
        known = [self._sum[k] / c for k, c in self._count.items() if k[1] == key[1] and c > 0]
        return sum(known) / len(known) if known else 1.0

    def score(self, var: int, frac: float) -> float:
        down = self.estimate(var, Direction.DOWN) * frac
        up = self.estimate(var, Direction.UP) * (1.0 - frac)
        return max(down, SCORE_EPS) * max(up, SCORE_EPS)


@dataclass
class BranchCounters:
    """History counters of the hybrid rule; conflict counters stay zero."""

    branchings: Dict[int, int] = field(default_factory=lambda: defaultdict(int))
    infeasible_children: Dict[int, int] = field(default_factory=lambda: defaultdict(int))
    fixing_children: Dict[int, int] = field(default_factory=lambda: defaultdict(int))
    conflicts: Dict[int, int] = field(default_factory=lambda: defaultdict(int))
    conflict_length: Dict[int, float] = field(default_factory=lambda: defaultdict(float))

    def record_branching(self, var: int) -> None:
        self.branchings[var] += 1

    def record_child(self, var: int, infeasible: bool, fixed: bool) -> None:
        if infeasible:
            self.infeasible_children[var] += 1
        if fixed:
            self.fixing_children[var] += 1

    def rate(self, table: Mapping[int, float], var: int) -> float:
        n = self.branchings.get(var, 0)
        return table.get(var, 0) / n if n else 0.0


def record_gmi_round(stats: GmiEffStats, efficacies: Mapping[int, float]) -> GmiEffStats:
    """Normalizes one separation round's efficacies (by source variable) and records them."""
    if not efficacies:
        return stats
    variables = sorted(efficacies)
    normalized = normalize_round([max(efficacies[v], 0.0) for v in variables])
    for var, value in zip(variables, normalized):
        stats.record(var, value)
    return stats


def update_pseudocosts(
    pc: PseudoCostStore, var: int, direction: Direction, gain: float, frac: float
) -> PseudoCostStore:
    pc.update(var, direction, gain, frac)
    return pc


def hybrid_score(
    var: int,
    stats: GmiEffStats,
    pc: PseudoCostStore,
    counters: BranchCounters,
    w: HybridBranchWeights,
    frac: float,
) -> float:
    score = w.w_pseudo * pc.score(var, frac)
    score += w.w_conflict_freq * counters.rate(counters.conflicts, var)
    score += w.w_conflict_len * counters.conflict_length.get(var, 0.0)
    score += w.w_fixfreq * counters.rate(counters.fixing_children, var)
    score += w.w_infeasfreq * counters.rate(counters.infeasible_children, var)
    score += w.w_nlcount * 0.0
    score += w.gmiavgeffweight * stats.avg.get(var, 0.0)
    score += w.gmilasteffweight * stats.last.get(var, 0.0)
    return score


def _argmax(scores: Sequence[Tuple[int, float]]) -> int:
    best_var, best = scores[0]
    for var, value in scores[1:]:
        if value > best + TIE_TOL or (abs(value - best) <= TIE_TOL and var < best_var):
            best_var, best = var, value
    return best_var


@dataclass
class BranchDecision:
    var: int
    cut: Optional[Cut] = None
    score: float = 0.0


class MostFractionalRule:
    def select(self, candidates: Sequence[int], x: Sequence[float], **_) -> BranchDecision:
        if not candidates:
            raise ModelError("Branching needs at least one candidate.")
        scores = [(j, min(fractionality(x[j]), 1 - fractionality(x[j]))) for j in candidates]
        var = _argmax(scores)
        return BranchDecision(var, score=dict(scores)[var])


class GmiBranchingRule:
    """Branches on the candidate whose tableau row yields the most efficacious GMI cut."""

    def __init__(self, gmi: GmiService, max_cands: int = 20):
        self.gmi = gmi
        self.max_cands = max_cands
        self.fallback = MostFractionalRule()

    def select(
        self, candidates: Sequence[int], x: Sequence[float], problem: Problem, lp: LpResult, **_
    ) -> BranchDecision:
        if not candidates:
            raise ModelError("Branching needs at least one candidate.")
        scored: List[Tuple[int, float]] = []
        cuts: Dict[int, Cut] = {}
        for j in sorted(candidates)[: self.max_cands]:
            cut = None
            if lp.basis[j] == VarStatus.BASIC:
                cut = self.gmi.cut_for_var(problem, lp, j)
            if cut is not None:
                cuts[j] = cut
            scored.append((j, cut.efficacy if cut is not None else 0.0))
        if not cuts:
            logger.debug("No candidate produced a GMI cut; using most fractional branching.")
            return self.fallback.select(candidates, x)
        var = _argmax(scored)
        return BranchDecision(var, cuts.get(var), dict(scored)[var])


class HybridBranchingRule:
    """Weighted-sum history rule extended by average and last normalized GMI efficacy."""

    def __init__(self, weights: HybridBranchWeights = HybridBranchWeights()):
        self.weights = weights

    def select(
        self,
        candidates: Sequence[int],
        x: Sequence[float],
        stats: GmiEffStats,
        pseudo: PseudoCostStore,
        counters: BranchCounters,
        **_,
    ) -> BranchDecision:
        if not candidates:
            raise ModelError("Branching needs at least one candidate.")
        scores = [
            (j, hybrid_score(j, stats, pseudo, counters, self.weights, fractionality(x[j]))) for j in candidates
        ]
        var = _argmax(scores)
        return BranchDecision(var, score=dict(scores)[var])


def branching_candidates(problem: Problem, x: Sequence[float], tol: Tolerances) -> List[int]:
    return [j for j in sorted(problem.integer_set) if not tol.is_integral(x[j])]
