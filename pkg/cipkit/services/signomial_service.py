"""
This module defines the SignomialService, a separator for lifted signomial
relations t = x^alpha on positive boxes.

A term is rewritten as u^beta = v^gamma with nonnegative exponents scaled so
that max(sum(beta), sum(gamma)) = 1. On the violated side the power with the
vertex polyhedral envelope is underestimated by a vertex LP and the concave
power on the other side is overestimated by its gradient.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config import SIGNOMIAL_MAX_UNDERVARS
from ..exceptions import SignomialError
from ..models import Cut, CutOrigin, LinRow, Problem, SignomialTerm
from .simplex_service import LpStatus, SimplexService

logger = logging.getLogger(__name__)

SIDE_TOL = 1e-9


@dataclass(frozen=True)
class LiftedForm:
    u_vars: Tuple[int, ...]
    beta_bar: Tuple[float, ...]
    beta: Tuple[float, ...]
    u_lower: Tuple[float, ...]
    u_upper: Tuple[float, ...]
    v_vars: Tuple[int, ...]
    gamma_bar: Tuple[float, ...]
    gamma: Tuple[float, ...]
    v_lower: Tuple[float, ...]
    v_upper: Tuple[float, ...]
    eta: float

    @property
    def h(self) -> int:
        return len(self.u_vars)

    @property
    def ell(self) -> int:
        return len(self.v_vars)

    def u_power(self, u: Sequence[float]) -> float:
        return float(np.prod([ui ** b for ui, b in zip(u, self.beta)])) if self.h else 1.0

    def v_power(self, v: Sequence[float]) -> float:
        return float(np.prod([vi ** g for vi, g in zip(v, self.gamma)]))


@dataclass
class Affine:
    """coeffs . z + const"""

    coeffs: np.ndarray
    const: float

    def __call__(self, z: Sequence[float]) -> float:
        return float(self.coeffs @ np.asarray(z, dtype=float)) + self.const if len(self.coeffs) else self.const


@dataclass
class EstimatorCut:
    side: str  # "S1": u^beta <= v^gamma, "S2": u^beta >= v^gamma
    under: Affine
    over: Affine
    cut: Cut
    violation: float


def _power_bounds(term: SignomialTerm) -> Tuple[float, float]:
    values = [
        float(np.prod([q ** a for q, a in zip(vertex, term.exponents)]))
        for vertex in itertools.product(*zip(term.lower, term.upper))
    ]
    return min(values), max(values)


class SignomialService:
    def __init__(self, simplex: Optional[SimplexService] = None, max_undervars: int = SIGNOMIAL_MAX_UNDERVARS):
        self.simplex = simplex or SimplexService()
        self.max_undervars = max_undervars

    def reformulate(self, term: SignomialTerm) -> LiftedForm:
        """
        Moves negative exponents next to t so both sides have nonnegative
        exponents and scales them by eta = 1 / max(sum(beta_bar), sum(gamma_bar)).

        Raises:
            SignomialError: If a box bound is not positive and finite.
        """
        for lo, up in zip(term.lower, term.upper):
            if not (lo > 0 and math.isfinite(up)):
                raise SignomialError(f"Signomial '{term.name}' needs a finite positive box, got [{lo}, {up}].")
        if any(a == 0 for a in term.exponents):
            raise SignomialError(f"Signomial '{term.name}' has a zero exponent.")

        t_lo, t_hi = _power_bounds(term)
        if term.aux_lower is not None:
            t_lo = term.aux_lower
        if term.aux_upper is not None:
            t_hi = term.aux_upper
        if not (t_lo > 0 and math.isfinite(t_hi) and t_lo <= t_hi):
            raise SignomialError(f"Signomial '{term.name}' needs a finite positive box for t, got [{t_lo}, {t_hi}].")

        positive = [k for k, a in enumerate(term.exponents) if a > 0]
        negative = [k for k, a in enumerate(term.exponents) if a < 0]
        beta_bar = tuple(term.exponents[k] for k in positive)
        gamma_bar = (1.0,) + tuple(-term.exponents[k] for k in negative)
        eta = 1.0 / max(sum(beta_bar), sum(gamma_bar))
        return LiftedForm(
            u_vars=tuple(term.var_indices[k] for k in positive),
            beta_bar=beta_bar,
            beta=tuple(eta * b for b in beta_bar),
            u_lower=tuple(term.lower[k] for k in positive),
            u_upper=tuple(term.upper[k] for k in positive),
            v_vars=(term.aux,) + tuple(term.var_indices[k] for k in negative),
            gamma_bar=gamma_bar,
            gamma=tuple(eta * g for g in gamma_bar),
            v_lower=(t_lo,) + tuple(term.lower[k] for k in negative),
            v_upper=(t_hi,) + tuple(term.upper[k] for k in negative),
            eta=eta,
        )

    def underestimate_u_beta(self, lf: LiftedForm, u_tilde: Sequence[float]) -> Tuple[np.ndarray, float]:
        """Best affine underestimator a.u + b of u^beta at u_tilde, tight on the box vertices."""
        return self._envelope(lf.beta, lf.u_lower, lf.u_upper, u_tilde)

    def overestimate_v_gamma(self, lf: LiftedForm, v_tilde: Sequence[float]) -> Affine:
        return self._tangent(lf.gamma, v_tilde)

    def _envelope(
        self, exponents: Sequence[float], lower: Sequence[float], upper: Sequence[float], point: Sequence[float]
    ) -> Tuple[np.ndarray, float]:
        h = len(exponents)
        if h == 0:
            return np.zeros(0), 1.0
        if h > self.max_undervars:
            raise SignomialError(f"{h} variables exceed the underestimation limit of {self.max_undervars}.")
        if any(lo >= up for lo, up in zip(lower, upper)):
            raise SignomialError("Degenerate box: a lower bound equals its upper bound.")

        target = [min(max(p, lo), up) for p, lo, up in zip(point, lower, upper)]
        rows = []
        for vertex in itertools.product(*zip(lower, upper)):
            value = float(np.prod([q ** e for q, e in zip(vertex, exponents)]))
            coeffs = {k: q for k, q in enumerate(vertex)}
            coeffs[h] = 1.0
            rows.append(LinRow.from_mapping(coeffs, -math.inf, value))
        lp_problem = Problem.create(
            objective=[-t for t in target] + [-1.0],
            rows=rows,
            lower=[-math.inf] * (h + 1),
            upper=[math.inf] * (h + 1),
        )
        result = self.simplex.solve_lp(lp_problem)
        if result.status != LpStatus.OPTIMAL:
            raise SignomialError(f"Vertex LP ended with status {result.status.value}.")
        return np.asarray(result.x[:h], dtype=float), float(result.x[h])

    @staticmethod
    def _tangent(exponents: Sequence[float], point: Sequence[float]) -> Affine:
        if any(p <= 0 for p in point):
            raise SignomialError("Gradient overestimation needs a strictly positive point.")
        if not exponents:
            return Affine(np.zeros(0), 1.0)
        value = float(np.prod([p ** e for p, e in zip(point, exponents)]))
        grad = np.array([e * value / p for p, e in zip(point, exponents)])
        return Affine(grad, value - float(grad @ np.asarray(point, dtype=float)))

    def separate(self, term: SignomialTerm, x: Sequence[float]) -> Optional[EstimatorCut]:
        """
        Separates a point given over the original variables (t included).

        Returns:
            The cut of the violated side, the more violated one in equality mode,
            or None if the point lies on the requested side(s).
        """
        lf = self.reformulate(term)
        u = [x[j] for j in lf.u_vars]
        v = [x[j] for j in lf.v_vars]
        if any(value <= 0 for value in u + v):
            raise SignomialError("Separation point must be strictly positive.")
        gap = lf.u_power(u) - lf.v_power(v)

        candidates: List[EstimatorCut] = []
        if term.sense in ("ge", "eq") and gap > SIDE_TOL:
            a, b = self._envelope(lf.beta, lf.u_lower, lf.u_upper, u)
            over = self._tangent(lf.gamma, v)
            candidates.append(self._assemble("S1", Affine(a, b), over, lf.u_vars, lf.v_vars, x))
        if term.sense in ("le", "eq") and gap < -SIDE_TOL:
            a, b = self._envelope(lf.gamma, lf.v_lower, lf.v_upper, v)
            over = self._tangent(lf.beta, u)
            candidates.append(self._assemble("S2", Affine(a, b), over, lf.v_vars, lf.u_vars, x))

        candidates = [c for c in candidates if c is not None and c.violation > SIDE_TOL]
        if not candidates:
            return None
        return max(candidates, key=lambda c: c.violation)

    @staticmethod
    def _assemble(
        side: str, under: Affine, over: Affine, under_vars: Sequence[int], over_vars: Sequence[int], x: Sequence[float]
    ) -> Optional[EstimatorCut]:
        # under(z_under) <= over(z_over)  <=>  a.z_under - g.z_over <= over.const - under.const
        coeffs = {}
        for j, a in zip(under_vars, under.coeffs):
            coeffs[j] = coeffs.get(j, 0.0) + float(a)
        for j, g in zip(over_vars, over.coeffs):
            coeffs[j] = coeffs.get(j, 0.0) - float(g)
        coeffs = {j: a for j, a in coeffs.items() if abs(a) > 1e-15}
        if not coeffs:
            return None
        cut = Cut(tuple(sorted(coeffs.items())), over.const - under.const, origin=CutOrigin.SIGNOMIAL)
        violation = cut.violation(x)
        cut.efficacy = violation / cut.norm()
        return EstimatorCut(side, under, over, cut, violation)

    def separate_problem(self, problem: Problem, x: Sequence[float]) -> List[Cut]:
        """Separates every signomial term of a problem at x; terms that cannot be handled are skipped."""
        cuts = []
        for term in problem.signomials:
            try:
                result = self.separate(term, x)
            except SignomialError as e:
                logger.warning(f"Signomial '{term.name}' skipped: {e}")
                continue
            if result is not None:
                cuts.append(result.cut)
        return cuts
