"""
Bound propagation shared by diving and the tree search.
"""

import math
from typing import List

from ..models import Problem, Tolerances


def propagate_bounds(problem: Problem, lower: List[float], upper: List[float], tol: Tolerances = Tolerances()) -> bool:
    """
    Applies the indicator implications in place: z fixed to 0 gives u_x <= 0 and
    z fixed to 1 gives l_x >= activation bound.

    Returns:
        False if some variable ends up with crossing bounds.
    """
    for ind in problem.indicators:
        z, x = ind.binvar, ind.var
        if upper[z] < 0.5:
            upper[x] = min(upper[x], 0.0)
        if lower[z] > 0.5:
            bound = ind.activation
            if x in problem.integer_set:
                bound = math.ceil(bound - tol.integrality)
            lower[x] = max(lower[x], bound)

    for j in range(problem.num_vars):
        if lower[j] > upper[j] + tol.feasibility:
            return False
        if lower[j] > upper[j]:
            upper[j] = lower[j]
    return True
