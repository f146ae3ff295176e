"""
Unit tests for the GmiService and the efficacy helpers.
"""

import itertools
import math
import random

import pytest

from cipkit.exceptions import CutError
from cipkit.models import Cut, CutOrigin, LinRow, Problem
from cipkit.services.gmi_service import GmiService, efficacy, normalize_round
from cipkit.services.simplex_service import SimplexService


@pytest.fixture
def knapsack():
    """max x + y s.t. 2x + 2y <= 3 with binary x and y."""
    return Problem.create(
        objective=[-1.0, -1.0],
        rows=[LinRow.from_mapping({0: 2.0, 1: 2.0}, -math.inf, 3.0, "cap")],
        lower=[0.0, 0.0],
        upper=[1.0, 1.0],
        integer_set=[0, 1],
        var_names=["x", "y"],
    )


@pytest.fixture
def gmi():
    return GmiService(SimplexService())


def test_knapsack_gmi_cut(gmi, knapsack):
    """Tests that the single GMI cut of the knapsack relaxation is x + y <= 1."""
    # Arrange
    lp = gmi.simplex.solve_lp(knapsack)

    # Act
    cuts = gmi.generate_round(knapsack, lp)

    # Assert
    assert len(cuts) == 1
    cut = cuts[0]
    assert cut.origin == CutOrigin.GMI
    assert [j for j, _ in cut.coeffs] == [0, 1]
    assert cut.coeffs[0][1] == pytest.approx(1.0)
    assert cut.coeffs[1][1] == pytest.approx(1.0)
    assert cut.rhs == pytest.approx(1.0)
    assert cut.efficacy == pytest.approx(0.5 / math.sqrt(2))
    assert cut.density == 1.0


def test_gmi_cut_keeps_every_integer_point(gmi, knapsack):
    """Tests validity of the generated cut against all feasible integer points."""
    # Arrange
    lp = gmi.simplex.solve_lp(knapsack)
    cut = gmi.generate_round(knapsack, lp)[0]

    # Act
    feasible = [p for p in itertools.product((0, 1), repeat=2) if 2 * p[0] + 2 * p[1] <= 3]

    # Assert
    assert feasible
    for point in feasible:
        assert cut.activity(point) <= cut.rhs + 1e-9


def test_integral_lp_gives_no_cuts(gmi):
    """Tests that an integral LP optimum produces an empty round."""
    # Arrange
    problem = Problem.create(
        objective=[-1.0],
        rows=[LinRow.from_mapping({0: 1.0}, -math.inf, 2.0)],
        lower=[0.0],
        upper=[5.0],
        integer_set=[0],
    )
    lp = gmi.simplex.solve_lp(problem)

    # Act
    cuts = gmi.generate_round(problem, lp)

    # Assert
    assert cuts == []


def test_cut_for_nonbasic_candidate_is_none(gmi, knapsack):
    """Tests that asking for a nonbasic candidate yields no cut instead of an error."""
    # Arrange
    lp = gmi.simplex.solve_lp(knapsack)
    nonbasic = next(j for j in range(2) if j not in lp.basic_vars)

    # Act
    cut = gmi.cut_for_var(knapsack, lp, nonbasic)

    # Assert
    assert cut is None


def test_efficacy_is_scale_invariant():
    """Tests efficacy values and their invariance to positive scaling."""
    # Arrange
    cut = Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=1.0)
    point = [0.75, 0.75]

    # Act
    value = efficacy(cut, point)
    scaled = efficacy(cut.scaled(10.0), point)

    # Assert
    assert value == pytest.approx(0.35355339)
    assert scaled == pytest.approx(value)


def test_efficacy_is_negative_for_satisfied_points():
    """Tests the sign of the efficacy for a point inside the cut."""
    cut = Cut(coeffs=((0, 1.0),), rhs=1.0)
    assert efficacy(cut, [0.0]) == pytest.approx(-1.0)


def test_zero_cut_is_rejected():
    """Tests that a cut without nonzero coefficients cannot be built."""
    with pytest.raises(CutError):
        Cut(coeffs=((0, 0.0),), rhs=1.0)


@pytest.mark.parametrize(
    "values, expected",
    [
        ([0.2, 0.4], [0.5, 1.0]),
        ([0.3], [1.0]),
        ([0.0, 0.0], [0.0, 0.0]),
    ],
)
def test_normalize_round(values, expected):
    """Tests division by the round maximum."""
    assert normalize_round(values) == pytest.approx(expected)


@pytest.mark.parametrize("values", [[], [0.1, -0.2]])
def test_normalize_round_errors(values):
    """Tests that empty and negative rounds are rejected."""
    with pytest.raises(CutError):
        normalize_round(values)


def test_elementary_split(gmi, knapsack):
    """Tests the split disjunction of a fractional integer variable."""
    # Act
    split = gmi.elementary_split(knapsack, 1, [1.0, 0.5])

    # Assert
    assert split.pi == {1: 1}
    assert split.pi0 == 0
    assert split.strictly_inside([1.0, 0.5])
    assert not split.strictly_inside([1.0, 1.0])


def test_elementary_split_errors(gmi):
    """Tests splits on continuous and integral variables."""
    # Arrange
    problem = Problem.create(objective=[0.0, 0.0], rows=[], lower=[0, 0], upper=[3, 3], integer_set=[1])

    # Act & Assert
    with pytest.raises(CutError, match="not integer"):
        gmi.elementary_split(problem, 0, [1.5, 1.5])
    with pytest.raises(CutError, match="integral"):
        gmi.elementary_split(problem, 1, [1.5, 2.0])


def _random_pure_integer(rng: random.Random) -> Problem:
    """Three to five integers in [0, 3]; rows anchored at a lattice point, some with fractional sides."""
    n = rng.randint(3, 5)
    anchor = [rng.randint(0, 3) for _ in range(n)]
    rows = []
    for i in range(rng.randint(2, 4)):
        coeffs = {j: float(rng.randint(-9, 9)) for j in range(n)}
        coeffs = {j: a for j, a in coeffs.items() if a != 0}
        if not coeffs:
            continue
        activity = sum(a * anchor[j] for j, a in coeffs.items())
        rhs = activity + rng.choice((0.0, 0.5, 1.0, 2.5, 4.0))
        lhs = activity - rng.choice((0.0, 1.5, 3.0)) if rng.random() < 0.3 else -math.inf
        rows.append(LinRow.from_mapping(coeffs, lhs, rhs, f"r{i}"))
    return Problem.create(objective=[0.0] * n, rows=rows, lower=[0.0] * n, upper=[3.0] * n, integer_set=range(n))


def test_random_gmi_cuts_keep_every_integer_point(gmi):
    """Tests at least 1000 GMI cuts from random LP vertices against every feasible lattice point."""
    # Arrange
    rng = random.Random(7)
    checked = 0

    for _ in range(5000):
        problem = _random_pure_integer(rng)
        feasible = [
            point
            for point in itertools.product(range(4), repeat=problem.num_vars)
            if all(row.lhs - 1e-9 <= row.activity(point) <= row.rhs + 1e-9 for row in problem.rows)
        ]
        for _ in range(3):
            objective = [float(rng.randint(-9, 9)) for _ in range(problem.num_vars)]
            lp = gmi.simplex.solve_lp(problem.with_objective(objective))
            if not lp.is_optimal:
                continue

            for var in gmi.fractional_candidates(problem, lp):
                # Act
                cut = gmi.gmi_from_row(gmi.simplex.tableau_row(lp, var), lp.lp, lp.x)
                if cut is None:
                    continue
                checked += 1

                # Assert
                assert cut.violation(lp.x) > 0
                for point in feasible:
                    assert cut.activity(point) <= cut.rhs + 1e-6, (problem, objective, cut, point)
        if checked >= 1000:
            break

    assert checked >= 1000
