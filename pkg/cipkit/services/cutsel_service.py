"""
This module defines cut scoring, filtering and the three cut selectors
(hybrid, dynamic and ensemble).
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import IncompatibleCutsError
from ..models import (
    Cut,
    CutSelectorKind,
    DynamicConfig,
    EnsembleConfig,
    FilterMode,
    HybridWeights,
    Problem,
    Solution,
    SolverConfig,
)
from .branching_service import PseudoCostStore, fractionality
from .gmi_service import efficacy

logger = logging.getLogger(__name__)

GEOM_EPS = 1e-12


@dataclass
class SelectionContext:
    problem: Problem
    x_bar: Sequence[float]
    incumbent: Optional[Solution] = None
    pseudo: Optional[PseudoCostStore] = None


def _unit(cut: Cut, n: int) -> Tuple[np.ndarray, float]:
    norm = cut.norm()
    return cut.dense(n) / norm, cut.rhs / norm


def cosine(c1: Cut, c2: Cut) -> float:
    n = 1 + max(j for j, _ in c1.coeffs + c2.coeffs)
    u1, _ = _unit(c1, n)
    u2, _ = _unit(c2, n)
    return float(u1 @ u2)


def directed_cutoff_distance(cut: Cut, x_bar: Sequence[float], incumbent: Optional[Solution]) -> float:
    """Violation measured along the unit direction from x_bar towards the incumbent."""
    if incumbent is None:
        return 0.0
    eff = efficacy(cut, x_bar)
    direction = np.asarray(incumbent.values, dtype=float) - np.asarray(x_bar, dtype=float)
    length = float(np.linalg.norm(direction))
    if length <= GEOM_EPS:
        return eff
    a = cut.dense(len(direction))
    projected = abs(float(a @ direction)) / length
    if projected <= GEOM_EPS:
        return eff
    return (cut.activity(x_bar) - cut.rhs) / projected


def score_hybrid(
    cut: Cut,
    x_bar: Sequence[float],
    incumbent: Optional[Solution],
    w: HybridWeights,
    problem: Problem,
) -> float:
    """w_eff*eff + w_intsup*intsup + w_objpar*|cos(a, c)| + w_dcd*dcd."""
    eff = efficacy(cut, x_bar)
    intsup = sum(1 for j, _ in cut.coeffs if j in problem.integer_set) / cut.nnz
    c = np.asarray(problem.objective, dtype=float)
    c_norm = float(np.linalg.norm(c))
    objpar = abs(float(cut.dense(len(c)) @ c)) / (cut.norm() * c_norm) if c_norm > 0 else 0.0
    dcd = directed_cutoff_distance(cut, x_bar, incumbent) if w.w_dcd > 0 else 0.0
    return w.w_eff * eff + w.w_intsup * intsup + w.w_objpar * objpar + w.w_dcd * dcd


def filter_orthogonality(sorted_cuts: Sequence[Cut], min_ortho: float = 0.9) -> List[Cut]:
    kept: List[Cut] = []
    for cut in sorted_cuts:
        if all(1.0 - abs(cosine(cut, other)) >= min_ortho for other in kept):
            kept.append(cut)
    return kept


def _pairwise(c1: Cut, c2: Cut, x_bar: Sequence[float]) -> Tuple[float, bool]:
    """Distance from x_bar to both half-spaces and whether both are active at the projection."""
    x = np.asarray(x_bar, dtype=float)
    n = len(x)
    u1, b1 = _unit(c1, n)
    u2, b2 = _unit(c2, n)
    v1 = float(u1 @ x - b1)
    v2 = float(u2 @ x - b2)
    cos = float(u1 @ u2)

    if 1.0 - abs(cos) <= 1e-12 and cos < 0 and b1 + b2 < -1e-12:
        raise IncompatibleCutsError("Opposite parallel cuts leave an empty region.")

    if v1 <= GEOM_EPS and v2 <= GEOM_EPS:
        return 0.0, False
    best = math.inf
    if v1 > 0 and float(u2 @ (x - v1 * u1) - b2) <= GEOM_EPS:
        best = min(best, v1)
    if v2 > 0 and float(u1 @ (x - v2 * u2) - b1) <= GEOM_EPS:
        best = min(best, v2)
    if math.isfinite(best):
        return best, False

    gram = np.array([[1.0, cos], [cos, 1.0]])
    mu = np.linalg.solve(gram, np.array([v1, v2]))
    distance = float(np.linalg.norm(mu[0] * u1 + mu[1] * u2))
    return distance, True


def pairwise_efficacy(c1: Cut, c2: Cut, x_bar: Sequence[float]) -> float:
    """Euclidean distance from x_bar to {x : a1.x <= b1, a2.x <= b2}."""
    return _pairwise(c1, c2, x_bar)[0]


def in_intersection_fan(c1: Cut, c2: Cut, x_bar: Sequence[float]) -> bool:
    """True when the nearest point of the two-cut region lies on both hyperplanes."""
    return _pairwise(c1, c2, x_bar)[1]


def filter_dynamic(sorted_cuts: Sequence[Cut], x_bar: Sequence[float], cfg: DynamicConfig) -> List[Cut]:
    """
    Keeps a cut only if, against every kept cut, the pairwise efficacy improves
    the kept cut's efficacy by the factor (1 + mingain) and x_bar lies in the
    intersection fan of the pair.
    """
    remaining = list(sorted_cuts)
    kept: List[Cut] = []
    while remaining:
        candidate = remaining.pop(0)
        accept = True
        for other in kept:
            try:
                distance, fan = _pairwise(other, candidate, x_bar)
            except IncompatibleCutsError:
                logger.debug("Dropping a cut incompatible with an already selected cut.")
                accept = False
                break
            if not fan or distance < (1.0 + cfg.mingain) * efficacy(other, x_bar):
                accept = False
                break
        if not accept:
            continue
        kept.append(candidate)
        if cfg.filtermode == FilterMode.F and remaining:
            rescored = []
            for position, cut in enumerate(remaining):
                try:
                    rescored.append((-pairwise_efficacy(candidate, cut, x_bar), position, cut))
                except IncompatibleCutsError:
                    rescored.append((math.inf, position, cut))
            rescored.sort(key=lambda item: (item[0], item[1]))
            remaining = [cut for _, _, cut in rescored]
    return kept


def _sorted_by_score(cuts: Sequence[Cut], scores: Sequence[float]) -> List[Cut]:
    order = sorted(range(len(cuts)), key=lambda i: (-scores[i], i))
    for i, s in enumerate(scores):
        cuts[i].score = s
    return [cuts[i] for i in order]


def _pseudo_gain(cut: Cut, x_bar: Sequence[float], problem: Problem, pseudo: Optional[PseudoCostStore]) -> float:
    support = [j for j, _ in cut.coeffs if j in problem.integer_set]
    if pseudo is None or not support:
        return 0.0
    values = []
    for j in support:
        frac = fractionality(x_bar[j])
        values.append(pseudo.score(j, frac if 0.0 < frac < 1.0 else 0.5))
    return sum(values) / len(values)


def select_ensemble(
    cuts: Sequence[Cut],
    x_bar: Sequence[float],
    pseudo: Optional[PseudoCostStore],
    cfg: EnsembleConfig,
    problem: Problem,
    incumbent: Optional[Solution] = None,
    weights: HybridWeights = HybridWeights(),
    max_cuts: Optional[int] = None,
) -> List[Cut]:
    """
    Greedy ensemble selection.

    Base score = hybrid score + w_pseudo * gain / top_gain + w_sparsity * (1 - density), where
    gain is the mean pseudo-cost score over the cut's integer support and top_gain is the
    largest gain of the round. The pseudo-cost term therefore lies in [0, w_pseudo] and does
    not move with the absolute size of the recorded objective gains. Each pick multiplies the
    remaining base scores by (1 - parallelism_penalty * max |cos|) against the kept cuts, and
    selection stops once the nonzero budget would be exceeded.
    """
    n = problem.num_vars
    dense_free = [c for c in cuts if c.nnz / max(n, 1) <= cfg.max_density]
    if not dense_free:
        return []

    gains = [_pseudo_gain(c, x_bar, problem, pseudo) for c in dense_free]
    top_gain = max(gains)
    base = []
    for cut, gain in zip(dense_free, gains):
        density = cut.nnz / max(n, 1)
        score = score_hybrid(cut, x_bar, incumbent, weights, problem)
        score += cfg.w_pseudo * (gain / top_gain if top_gain > 0 else 0.0)
        score += cfg.w_sparsity * (1.0 - density)
        base.append(score)

    budget = cfg.budget_for(n)
    remaining = list(range(len(dense_free)))
    kept: List[int] = []
    used = 0
    while remaining and (max_cuts is None or len(kept) < max_cuts):
        adjusted = []
        for i in remaining:
            parallel = max((abs(cosine(dense_free[i], dense_free[k])) for k in kept), default=0.0)
            adjusted.append((base[i] * (1.0 - cfg.parallelism_penalty * parallel), i))
        value, pick = max(adjusted, key=lambda item: (item[0], -item[1]))
        if used + dense_free[pick].nnz > budget:
            break
        used += dense_free[pick].nnz
        dense_free[pick].score = value
        kept.append(pick)
        remaining.remove(pick)
    return [dense_free[i] for i in kept]


class HybridSelector:
    def __init__(self, weights: HybridWeights = HybridWeights(), min_ortho: float = 0.9, max_cuts: int = 20):
        self.weights = weights
        self.min_ortho = min_ortho
        self.max_cuts = max_cuts

    def select(self, cuts: Sequence[Cut], ctx: SelectionContext) -> List[Cut]:
        if not cuts:
            return []
        scores = [score_hybrid(c, ctx.x_bar, ctx.incumbent, self.weights, ctx.problem) for c in cuts]
        return filter_orthogonality(_sorted_by_score(list(cuts), scores), self.min_ortho)[: self.max_cuts]


class DynamicSelector:
    def __init__(self, weights: HybridWeights = HybridWeights(), cfg: DynamicConfig = DynamicConfig(), max_cuts: int = 20):
        self.weights = weights
        self.cfg = cfg
        self.max_cuts = max_cuts

    def select(self, cuts: Sequence[Cut], ctx: SelectionContext) -> List[Cut]:
        if not cuts:
            return []
        scores = [score_hybrid(c, ctx.x_bar, ctx.incumbent, self.weights, ctx.problem) for c in cuts]
        return filter_dynamic(_sorted_by_score(list(cuts), scores), ctx.x_bar, self.cfg)[: self.max_cuts]


class EnsembleSelector:
    def __init__(self, weights: HybridWeights = HybridWeights(), cfg: EnsembleConfig = EnsembleConfig(), max_cuts: int = 20):
        self.weights = weights
        self.cfg = cfg
        self.max_cuts = max_cuts

    def select(self, cuts: Sequence[Cut], ctx: SelectionContext) -> List[Cut]:
        return select_ensemble(
            cuts, ctx.x_bar, ctx.pseudo, self.cfg, ctx.problem, ctx.incumbent, self.weights, self.max_cuts
        )


def make_selector(config: SolverConfig):
    """Builds the selector named by the solver configuration."""
    if config.cutsel == CutSelectorKind.DYNAMIC:
        return DynamicSelector(config.hybrid_weights, config.dynamic, config.max_cuts_per_round)
    if config.cutsel == CutSelectorKind.ENSEMBLE:
        return EnsembleSelector(config.hybrid_weights, config.ensemble, config.max_cuts_per_round)
    return HybridSelector(config.hybrid_weights, config.min_orthogonality, config.max_cuts_per_round)
