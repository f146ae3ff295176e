"""
Unit tests for the SignomialService.
"""

import itertools
from dataclasses import replace

import numpy as np
import pytest

from cipkit.exceptions import SignomialError
from cipkit.models import Problem, SignomialTerm
from cipkit.services.signomial_service import SignomialService


@pytest.fixture
def service():
    return SignomialService()


@pytest.fixture
def bilinear():
    """t = x1 * x2 on [1, 4]^2 with t stored at index 2."""
    return SignomialTerm(exponents=(1.0, 1.0), var_indices=(0, 1), aux=2, lower=(1.0, 1.0), upper=(4.0, 4.0))


def _grid_is_valid(term: SignomialTerm, cut, side: str, steps: int = 21) -> bool:
    t_values = [term.value(v) for v in itertools.product(*zip(term.lower, term.upper))]
    axes = [np.linspace(lo, up, steps) for lo, up in zip(term.lower, term.upper)]
    axes.append(np.linspace(min(t_values), max(t_values), steps))
    n = max(term.var_indices + (term.aux,)) + 1
    for values in itertools.product(*axes):
        point = [0.0] * n
        for j, v in zip(term.var_indices, values[:-1]):
            point[j] = v
        point[term.aux] = values[-1]
        power = term.value(point)
        on_side = point[term.aux] >= power if side == "S1" else point[term.aux] <= power
        if on_side and cut.violation(point) > 1e-7:
            return False
    return True


def test_reformulate_bilinear(service, bilinear):
    """Tests the scaling of t = x1 x2 to a square root on both sides."""
    # Act
    lf = service.reformulate(bilinear)

    # Assert
    assert lf.u_vars == (0, 1)
    assert lf.beta_bar == (1.0, 1.0)
    assert lf.v_vars == (2,)
    assert lf.eta == pytest.approx(0.5)
    assert lf.beta == pytest.approx((0.5, 0.5))
    assert lf.gamma == pytest.approx((0.5,))
    assert (lf.v_lower, lf.v_upper) == ((1.0,), (16.0,))


def test_reformulate_moves_negative_exponents(service):
    """Tests that x2^-0.5 moves next to t."""
    # Arrange
    term = SignomialTerm(exponents=(1.5, -0.5), var_indices=(0, 1), aux=2, lower=(1.0, 1.0), upper=(2.0, 2.0))

    # Act
    lf = service.reformulate(term)

    # Assert
    assert lf.u_vars == (0,)
    assert lf.v_vars == (2, 1)
    assert lf.gamma_bar == (1.0, 0.5)
    assert lf.eta == pytest.approx(2.0 / 3.0)
    assert lf.beta == pytest.approx((1.0,))
    assert lf.gamma == pytest.approx((2.0 / 3.0, 1.0 / 3.0))
    assert max(sum(lf.beta), sum(lf.gamma)) == pytest.approx(1.0, abs=1e-12)


def test_reformulate_single_variable(service):
    """Tests that t = x keeps unit exponents."""
    lf = service.reformulate(SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=1, lower=(1.0,), upper=(3.0,)))
    assert lf.eta == 1.0
    assert lf.beta == (1.0,)
    assert lf.gamma == (1.0,)


@pytest.mark.parametrize(
    "term, match",
    [
        (SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=1, lower=(0.0,), upper=(3.0,)), "finite positive box"),
        (SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=1, lower=(1.0,), upper=(np.inf,)), "finite positive"),
        (SignomialTerm(exponents=(0.0,), var_indices=(0,), aux=1, lower=(1.0,), upper=(3.0,)), "zero exponent"),
        (
            SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=1, lower=(1.0,), upper=(3.0,), aux_lower=-1.0),
            "box for t",
        ),
    ],
)
def test_reformulate_errors(service, term, match):
    """Tests the rejection of nonpositive or unbounded boxes."""
    with pytest.raises(SignomialError, match=match):
        service.reformulate(term)


def test_underestimate_is_secant_in_one_dimension(service):
    """Tests the envelope of sqrt(u) on [1, 4] at 2.5."""
    # Arrange
    lf = service.reformulate(SignomialTerm(exponents=(0.5,), var_indices=(0,), aux=1, lower=(1.0,), upper=(4.0,)))

    # Act
    a, b = service.underestimate_u_beta(lf, [2.5])

    # Assert
    assert lf.beta == pytest.approx((0.5,))
    assert a == pytest.approx([1.0 / 3.0])
    assert b == pytest.approx(2.0 / 3.0)


def test_underestimate_of_linear_power(service):
    """Tests that a linear power is its own envelope."""
    lf = service.reformulate(SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=1, lower=(1.0,), upper=(3.0,)))
    a, b = service.underestimate_u_beta(lf, [2.0])
    assert a == pytest.approx([1.0])
    assert b == pytest.approx(0.0, abs=1e-9)


def test_underestimate_is_valid_and_tight_at_vertex(service, bilinear):
    """Tests vertex tightness and validity on a 10 x 10 grid of the box."""
    # Arrange
    lf = service.reformulate(bilinear)

    # Act
    a, b = service.underestimate_u_beta(lf, [1.0, 1.0])

    # Assert
    assert float(a @ np.array([1.0, 1.0])) + b == pytest.approx(1.0)
    for u in itertools.product(np.linspace(1.0, 4.0, 10), repeat=2):
        assert float(a @ np.array(u)) + b <= lf.u_power(u) + 1e-9


def test_underestimate_limits():
    """Tests the variable limit and the degenerate box."""
    # Arrange
    service = SignomialService(max_undervars=1)
    wide = SignomialTerm(exponents=(1.0, 1.0), var_indices=(0, 1), aux=2, lower=(1.0, 1.0), upper=(2.0, 2.0))
    flat = SignomialTerm(exponents=(0.5,), var_indices=(0,), aux=1, lower=(2.0,), upper=(2.0,))

    # Act & Assert
    with pytest.raises(SignomialError, match="underestimation limit"):
        service.underestimate_u_beta(service.reformulate(wide), [1.5, 1.5])
    with pytest.raises(SignomialError, match="Degenerate box"):
        service.underestimate_u_beta(service.reformulate(flat), [2.0])


def test_overestimate_examples(service, bilinear):
    """Tests the tangent planes of sqrt(v) and v1^(2/3) v2^(1/3)."""
    # Arrange
    mixed = SignomialTerm(exponents=(1.5, -0.5), var_indices=(0, 1), aux=2, lower=(1.0, 1.0), upper=(2.0, 2.0))

    # Act
    sqrt_plane = service.overestimate_v_gamma(service.reformulate(bilinear), [1.0])
    mixed_plane = service.overestimate_v_gamma(service.reformulate(mixed), [1.0, 1.0])

    # Assert
    assert sqrt_plane.coeffs == pytest.approx([0.5])
    assert sqrt_plane.const == pytest.approx(0.5)
    assert all(sqrt_plane([v]) >= np.sqrt(v) - 1e-12 for v in (0.01, 0.5, 1.0, 3.0, 100.0))
    assert mixed_plane.coeffs == pytest.approx([2.0 / 3.0, 1.0 / 3.0])
    assert mixed_plane.const == pytest.approx(0.0, abs=1e-12)


def test_overestimate_rejects_nonpositive_point(service, bilinear):
    """Tests the positivity precondition of the tangent."""
    with pytest.raises(SignomialError):
        service.overestimate_v_gamma(service.reformulate(bilinear), [0.0])


def test_separate_below_the_product(service, bilinear):
    """Tests the cut for t = 1 at x = (2, 2) and its validity on a 21^3 grid."""
    # Arrange
    point = [2.0, 2.0, 1.0]

    # Act
    result = service.separate(bilinear, point)

    # Assert
    assert result is not None
    assert result.side == "S1"
    assert result.violation == pytest.approx(2.0 / 3.0, abs=1e-7)
    assert result.cut.violation(point) > 0
    assert _grid_is_valid(bilinear, result.cut, "S1")


def test_separate_above_the_product(service, bilinear):
    """Tests the mirrored cut 0.2 t - 0.5 x1 - 0.5 x2 <= -0.8 for t = 9 at x = (2, 2)."""
    # Arrange
    point = [2.0, 2.0, 9.0]

    # Act
    result = service.separate(bilinear, point)

    # Assert
    assert result.side == "S2"
    assert [j for j, _ in result.cut.coeffs] == [0, 1, 2]
    assert [a for _, a in result.cut.coeffs] == pytest.approx([-0.5, -0.5, 0.2])
    assert result.cut.rhs == pytest.approx(-0.8)
    assert result.violation == pytest.approx(0.6)
    assert _grid_is_valid(bilinear, result.cut, "S2")


def test_separate_point_on_the_surface(service, bilinear):
    """Tests that a point with t = x1 x2 is not separated."""
    assert service.separate(bilinear, [2.0, 2.0, 4.0]) is None


def test_separate_respects_sense(service, bilinear):
    """Tests that only the side requested by the constraint sense is separated."""
    # Arrange
    le = replace(bilinear, sense="le")
    ge = replace(bilinear, sense="ge")
    point = [2.0, 2.0, 1.0]

    # Act & Assert
    assert service.separate(le, point) is None
    assert service.separate(ge, point).side == "S1"


def test_separate_rejects_nonpositive_point(service, bilinear):
    """Tests the positivity precondition of separation."""
    with pytest.raises(SignomialError):
        service.separate(bilinear, [0.0, 2.0, 1.0])


def test_random_terms_give_valid_cuts(service):
    """Tests validity and violation of cuts for seeded random terms with up to two variables."""
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(25):
        # Arrange
        h = int(rng.integers(1, 3))
        exponents = tuple(float(e) for e in rng.choice([-1.5, -1.0, -0.5, 0.5, 1.0, 2.0], size=h))
        lower = tuple(float(v) for v in rng.uniform(0.5, 2.0, size=h))
        upper = tuple(float(lo + rng.uniform(0.5, 2.0)) for lo in lower)
        term = SignomialTerm(exponents=exponents, var_indices=tuple(range(h)), aux=h, lower=lower, upper=upper)
        x = [float(rng.uniform(lo, up)) for lo, up in zip(lower, upper)]
        power = term.value(x)
        point = x + [float(power * rng.choice([0.5, 2.0]))]

        # Act
        result = service.separate(term, point)

        # Assert
        lf = service.reformulate(term)
        assert max(sum(lf.beta), sum(lf.gamma)) == pytest.approx(1.0, abs=1e-12)
        if result is None:
            continue
        checked += 1
        assert result.cut.violation(point) > 0
        assert _grid_is_valid(term, result.cut, result.side, steps=11)
    assert checked > 0


def test_separate_problem_skips_bad_terms(service, bilinear):
    """Tests that a term with a nonpositive box is skipped and the others separated."""
    # Arrange
    bad = SignomialTerm(exponents=(1.0,), var_indices=(0,), aux=2, lower=(0.0,), upper=(4.0,), name="bad")
    problem = Problem.create(
        objective=[0.0] * 3,
        rows=[],
        lower=[0.0, 1.0, 1.0],
        upper=[4.0, 4.0, 16.0],
        signomials=[bilinear, bad],
    )

    # Act
    cuts = service.separate_problem(problem, [2.0, 2.0, 1.0])

    # Assert
    assert len(cuts) == 1
    assert cuts[0].origin.value == "signomial"
