"""
Unit tests for the indicator bound propagation.
"""

import math

import pytest

from cipkit.models import IndicatorCons, Problem
from cipkit.services.propagation_service import propagate_bounds


@pytest.fixture
def indicator_problem():
    return Problem.create(
        objective=[1.0, 0.0],
        rows=[],
        lower=[0.0, 0.0],
        upper=[10.0, 1.0],
        integer_set=[1],
        indicators=[IndicatorCons(binvar=1, var=0, activation=4.0)],
    )


def test_z_fixed_to_zero_closes_x(indicator_problem):
    """Tests that z = 0 forces the upper bound of x to 0."""
    lower, upper = [0.0, 0.0], [10.0, 0.0]
    assert propagate_bounds(indicator_problem, lower, upper)
    assert (lower[0], upper[0]) == (0.0, 0.0)


def test_z_fixed_to_one_lifts_x(indicator_problem):
    """Tests that z = 1 raises the lower bound of x to the activation bound."""
    lower, upper = [0.0, 1.0], [10.0, 1.0]
    assert propagate_bounds(indicator_problem, lower, upper)
    assert lower[0] == 4.0


def test_crossing_bounds_are_infeasible(indicator_problem):
    """Tests that an activation bound above u_x makes the node infeasible."""
    lower, upper = [0.0, 1.0], [3.0, 1.0]
    assert not propagate_bounds(indicator_problem, lower, upper)


def test_integer_x_rounds_activation_up():
    """Tests the rounded activation bound for an integer x."""
    # Arrange
    problem = Problem.create(
        objective=[0.0, 0.0],
        rows=[],
        lower=[0.0, 0.0],
        upper=[math.inf, 1.0],
        integer_set=[0, 1],
        indicators=[IndicatorCons(binvar=1, var=0, activation=2.5)],
    )
    lower, upper = [0.0, 1.0], [math.inf, 1.0]

    # Act
    ok = propagate_bounds(problem, lower, upper)

    # Assert
    assert ok
    assert lower[0] == 3


def test_unfixed_z_changes_nothing(indicator_problem):
    """Tests that an unfixed indicator variable implies nothing."""
    lower, upper = [0.0, 0.0], [10.0, 1.0]
    assert propagate_bounds(indicator_problem, lower, upper)
    assert (lower, upper) == ([0.0, 0.0], [10.0, 1.0])
