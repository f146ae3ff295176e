"""
Unit tests for the Lagromory relax-and-cut separator.
"""

import itertools
import math
import random

import numpy as np
import pytest

from cipkit.models import LagromoryConfig, LinRow, Problem, Regularization
from cipkit.services.lagromory_service import LagromoryService, project_l1, project_l2, runs_at_depth
from cipkit.services.oracle_service import OracleService
from cipkit.services.simplex_service import SimplexService


@pytest.fixture
def service():
    return LagromoryService(SimplexService())


@pytest.fixture
def knapsack():
    return Problem.create(
        objective=[-1.0, -1.0],
        rows=[LinRow.from_mapping({0: 2.0, 1: 2.0}, -math.inf, 3.0, "cap")],
        lower=[0.0, 0.0],
        upper=[1.0, 1.0],
        integer_set=[0, 1],
    )


def test_should_run_threshold_is_inclusive(service, knapsack):
    """Tests the degeneracy trigger at and above the knapsack degeneracy of one half."""
    # Arrange
    lp = service.simplex.solve_lp(knapsack)

    # Act & Assert
    assert service.simplex.dual_degeneracy(lp) == pytest.approx(0.5)
    assert service.should_run(lp, LagromoryConfig(degeneracy_threshold=0.5))
    assert not service.should_run(lp, LagromoryConfig(degeneracy_threshold=0.6))


def test_should_run_on_zero_objective(service, knapsack):
    """Tests that a fully dual degenerate LP triggers the separator."""
    lp = service.simplex.solve_lp(knapsack.with_objective([0.0, 0.0]))
    assert service.should_run(lp, LagromoryConfig())


def test_bound_between_lp_and_optimum(service, knapsack):
    """Tests weak duality of every Lagrangian value on the knapsack."""
    # Arrange
    root = service.simplex.solve_lp(knapsack)
    optimum = OracleService().brute_force_optimum(knapsack).objective

    # Act
    result = service.relax_and_cut(knapsack, root, LagromoryConfig(max_iters=10))

    # Assert
    assert result.bounds
    assert root.objective - 1e-9 <= result.best_bound <= optimum + 1e-9
    assert all(value <= optimum + 1e-9 for value in result.bounds)
    assert result.best_bound == pytest.approx(max(result.bounds + [root.objective]))


def _random_enumerable(rng: random.Random) -> Problem:
    """Three or four integers in [0, 3] with rows anchored at a lattice point."""
    n = rng.randint(3, 4)
    anchor = [rng.randint(0, 3) for _ in range(n)]
    rows = []
    for i in range(rng.randint(2, 3)):
        coeffs = {j: float(rng.randint(-9, 9)) for j in range(n)}
        coeffs = {j: a for j, a in coeffs.items() if a != 0}
        if coeffs:
            activity = sum(a * anchor[j] for j, a in coeffs.items())
            rows.append(LinRow.from_mapping(coeffs, -math.inf, activity + rng.randint(0, 5) + 0.5, f"r{i}"))
    return Problem.create(
        objective=[float(rng.randint(-9, 9)) for _ in range(n)],
        rows=rows,
        lower=[0.0] * n,
        upper=[3.0] * n,
        integer_set=range(n),
    )


@pytest.mark.parametrize("regularization", [Regularization.L1, Regularization.L2])
def test_bound_between_lp_and_optimum_on_random_instances(service, regularization):
    """Tests root LP <= Lagrangian bound <= MILP optimum on 50 enumerable instances."""
    # Arrange
    rng = random.Random(19)
    oracle = OracleService()
    cfg = LagromoryConfig(max_iters=10, regularization=regularization, radius=5.0)

    for _ in range(50):
        problem = _random_enumerable(rng)
        root = service.simplex.solve_lp(problem)
        optimum = oracle.brute_force_optimum(problem)
        assert root.is_optimal and optimum.status == "optimal"
        points = [
            p
            for p in itertools.product(range(4), repeat=problem.num_vars)
            if all(row.activity(p) <= row.rhs + 1e-9 for row in problem.rows)
        ]

        # Act
        result = service.relax_and_cut(problem, root, cfg)

        # Assert
        assert root.objective - 1e-7 <= result.best_bound <= optimum.objective + 1e-6
        assert all(value <= optimum.objective + 1e-6 for value in result.bounds)
        for cut in result.cuts:
            assert all(cut.activity(p) <= cut.rhs + 1e-6 for p in points)


def test_harvested_cuts_are_valid(service, knapsack):
    """Tests that no feasible integer point violates a harvested cut."""
    # Arrange
    root = service.simplex.solve_lp(knapsack)
    points = [p for p in itertools.product((0, 1), repeat=2) if 2 * sum(p) <= 3]

    # Act
    result = service.relax_and_cut(knapsack, root, LagromoryConfig(max_iters=10))

    # Assert
    assert result.cuts
    for cut in result.cuts:
        assert all(cut.activity(p) <= cut.rhs + 1e-9 for p in points)


def test_integral_lp_returns_lp_bound(service):
    """Tests that without any cut the bound stays the LP bound."""
    # Arrange
    problem = Problem.create(objective=[-1.0], rows=[], lower=[0.0], upper=[2.0], integer_set=[0])
    root = service.simplex.solve_lp(problem)

    # Act
    result = service.relax_and_cut(problem, root, LagromoryConfig(max_iters=1))

    # Assert
    assert result.best_bound == pytest.approx(root.objective)
    assert result.cuts == []


def test_full_stabilization_keeps_zero_multipliers(service, knapsack):
    """Tests that stabilization 1 with a zero core never moves the multipliers."""
    # Arrange
    root = service.simplex.solve_lp(knapsack)

    # Act
    result = service.relax_and_cut(knapsack, root, LagromoryConfig(max_iters=4, stabilization=1.0))

    # Assert
    assert np.all(result.state.multipliers == 0.0)
    assert all(value == pytest.approx(root.objective) for value in result.bounds)
    assert result.best_bound == pytest.approx(root.objective)


def test_regularization_variants_stay_valid(service, knapsack):
    """Tests both norm balls and no regularization."""
    root = service.simplex.solve_lp(knapsack)
    for reg in Regularization:
        result = service.relax_and_cut(knapsack, root, LagromoryConfig(max_iters=6, regularization=reg, radius=1.0))
        assert result.best_bound <= -1.0 + 1e-9
        assert np.all(result.state.multipliers >= 0.0)


def test_projections():
    """Tests the clipping of negative entries and the norm balls."""
    # Arrange
    v = np.array([3.0, -1.0, 1.0])

    # Act
    l1 = project_l1(v, 2.0)
    l2 = project_l2(v, 1.0)

    # Assert
    assert l1 == pytest.approx([2.0, 0.0, 0.0])
    assert l2 == pytest.approx(np.array([3.0, 0.0, 1.0]) / math.sqrt(10.0))
    assert project_l2(np.array([0.1, -0.2]), 1.0) == pytest.approx([0.1, 0.0])


@pytest.mark.parametrize(
    "freq, depth, expected",
    [(-1, 0, False), (0, 0, True), (0, 2, False), (2, 2, True), (2, 3, False), (2, 6, False)],
)
def test_runs_at_depth(freq, depth, expected):
    """Tests the frequency rule with a maximal cut depth of 4."""
    assert runs_at_depth(freq, depth, 4) is expected
