"""
This module defines the LagromoryService, a relax-and-cut separator that
dualizes GMI cuts into the LP objective and harvests new GMI cuts from the
bases visited by the subgradient iterations.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ..models import Cut, LagromoryConfig, Problem, Regularization, Tolerances
from .gmi_service import GmiService
from .simplex_service import LpResult, SimplexService

logger = logging.getLogger(__name__)


@dataclass
class LagrangianState:
    multipliers: np.ndarray
    core: np.ndarray
    best_bound: float
    step: float = 1.0
    iteration: int = 0


@dataclass
class LagromoryResult:
    best_bound: float
    cuts: List[Cut]
    bounds: List[float] = field(default_factory=list)
    state: Optional[LagrangianState] = None


def project_l1(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum(x) <= radius}."""
    w = np.maximum(v, 0.0)
    if w.sum() <= radius:
        return w
    u = np.sort(v)[::-1]
    cumulative = np.cumsum(u) - radius
    ks = np.arange(1, len(u) + 1)
    rho = int(np.nonzero(u - cumulative / ks > 0)[0][-1])
    theta = cumulative[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def project_l2(v: np.ndarray, radius: float) -> np.ndarray:
    w = np.maximum(v, 0.0)
    norm = float(np.linalg.norm(w))
    return w * (radius / norm) if norm > radius else w


def runs_at_depth(freq: int, depth: int, max_depth: int) -> bool:
    """-1 disables, 0 means root only, k > 0 every k-th depth within the cut depth."""
    if freq < 0:
        return False
    if freq == 0:
        return depth == 0
    return depth % freq == 0 and depth <= max_depth


class LagromoryService:
    def __init__(
        self,
        simplex: Optional[SimplexService] = None,
        gmi: Optional[GmiService] = None,
        tol: Tolerances = Tolerances(),
    ):
        self.simplex = simplex or SimplexService()
        self.gmi = gmi or GmiService(self.simplex, tol)
        self.tol = tol

    def should_run(self, lp: LpResult, cfg: LagromoryConfig) -> bool:
        return self.simplex.dual_degeneracy(lp, self.tol) >= cfg.degeneracy_threshold

    def relax_and_cut(
        self,
        problem: Problem,
        root_lp: LpResult,
        cfg: LagromoryConfig = LagromoryConfig(),
        incumbent: Optional[float] = None,
        initial_cuts: Optional[List[Cut]] = None,
    ) -> LagromoryResult:
        """
        Runs subgradient iterations on the multipliers of the dualized cut pool.

        Every Lagrangian value min{(c + lambda A_cut).x : x in LP} - lambda.b_cut is
        a valid dual bound for the MILP; the best one is returned together with
        the distinct cuts of the pool.
        """
        pool: List[Cut] = []
        keys = set()
        for cut in list(initial_cuts or []) + self.gmi.generate_round(problem, root_lp):
            if cut.key() not in keys:
                keys.add(cut.key())
                pool.append(cut)

        c = np.asarray(problem.objective, dtype=float)
        n = problem.num_vars
        state = LagrangianState(np.zeros(len(pool)), np.zeros(len(pool)), root_lp.objective)
        best_multipliers = np.zeros(len(pool))
        bounds: List[float] = []
        warm = root_lp.basis
        stall = 0

        for iteration in range(1, cfg.max_iters + 1):
            if not pool:
                break
            state.iteration = iteration
            a = np.array([cut.dense(n) for cut in pool])
            b = np.array([cut.rhs for cut in pool])
            objective = c + state.multipliers @ a
            lp = self.simplex.solve_lp(problem.with_objective(objective), warm_basis=warm)
            if not lp.is_optimal:
                logger.debug(f"Lagromory stopped at iteration {iteration}: LP {lp.status.value}.")
                break
            value = lp.objective - float(state.multipliers @ b)
            bounds.append(value)
            if value > state.best_bound + 1e-9:
                state.best_bound = value
                best_multipliers = state.multipliers.copy()
                stall = 0
            else:
                stall += 1

            added = 0
            for cut in sorted(self.gmi.generate_round(problem, lp), key=lambda cut: -cut.efficacy):
                if added >= cfg.cuts_per_basis:
                    break
                if cut.key() in keys:
                    continue
                keys.add(cut.key())
                pool.append(cut)
                added += 1
            if added:
                pad = np.zeros(added)
                state.multipliers = np.concatenate([state.multipliers, pad])
                best_multipliers = np.concatenate([best_multipliers, pad])
                a = np.array([cut.dense(n) for cut in pool])
                b = np.array([cut.rhs for cut in pool])
            if stall >= cfg.stall_iters:
                break

            subgradient = a @ lp.x - b
            norm_sq = float(subgradient @ subgradient)
            if norm_sq <= 1e-18:
                break
            if incumbent is not None and incumbent > value:
                state.step = (incumbent - value) / norm_sq
            else:
                state.step = 1.0 / iteration
            updated = np.maximum(state.multipliers + state.step * subgradient, 0.0)
            if cfg.regularization == Regularization.L2:
                updated = project_l2(updated, cfg.radius)
            elif cfg.regularization == Regularization.L1:
                updated = project_l1(updated, cfg.radius)
            state.core = best_multipliers
            state.multipliers = (1.0 - cfg.stabilization) * updated + cfg.stabilization * state.core
            warm = lp.basis

        logger.info(
            f"Lagromory: bound {state.best_bound:.6g} (LP {root_lp.objective:.6g}) after {state.iteration} "
            f"iterations, {len(pool)} cuts in pool."
        )
        return LagromoryResult(state.best_bound, pool, bounds, state)
