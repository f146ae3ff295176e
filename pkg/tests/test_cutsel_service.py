"""
Unit tests for cut scoring, filtering and the three cut selectors.
"""

import math

import numpy as np
import pytest

from cipkit.exceptions import IncompatibleCutsError
from cipkit.models import (
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
from cipkit.services.branching_service import Direction, PseudoCostStore
from cipkit.services.cutsel_service import (
    DynamicSelector,
    EnsembleSelector,
    HybridSelector,
    SelectionContext,
    directed_cutoff_distance,
    filter_dynamic,
    filter_orthogonality,
    in_intersection_fan,
    make_selector,
    pairwise_efficacy,
    score_hybrid,
    select_ensemble,
)


def _problem(n, objective=None, integers=()):
    return Problem.create(
        objective=objective or [0.0] * n,
        rows=[],
        lower=[0.0] * n,
        upper=[10.0] * n,
        integer_set=integers,
    )


@pytest.fixture
def corner_cuts():
    """x >= 1 and y >= 1 written as <= cuts."""
    return Cut(coeffs=((0, -1.0),), rhs=-1.0), Cut(coeffs=((1, -1.0),), rhs=-1.0)


def test_score_hybrid_knapsack_cut():
    """Tests the weighted sum on the knapsack cut at its LP point."""
    # Arrange
    problem = _problem(2, objective=[-1.0, -1.0], integers=[0, 1])
    cut = Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=1.0)
    weights = HybridWeights(w_eff=1.0, w_intsup=0.1, w_objpar=0.1, w_dcd=0.0)

    # Act
    score = score_hybrid(cut, [0.75, 0.75], None, weights, problem)

    # Assert
    assert score == pytest.approx(0.35355339 + 0.2)


def test_score_hybrid_pure_efficacy():
    """Tests that efficacy-only weights reproduce the efficacy."""
    problem = _problem(2, objective=[1.0, 0.0])
    cut = Cut(coeffs=((0, 3.0), (1, 4.0)), rhs=0.0)
    score = score_hybrid(cut, [1.0, 1.0], None, HybridWeights(1.0, 0.0, 0.0, 0.0), problem)
    assert score == pytest.approx(7.0 / 5.0)


def test_directed_cutoff_distance():
    """Tests the distance measured along the ray towards the incumbent."""
    # Arrange
    cut = Cut(coeffs=((0, 1.0),), rhs=1.0)
    incumbent = Solution([0.0, 2.0], 0.0)

    # Act
    dcd = directed_cutoff_distance(cut, [2.0, 0.0], incumbent)

    # Assert
    # the ray (-2, 2)/sqrt(8) crosses x = 1 after a distance of sqrt(2)
    assert dcd == pytest.approx(math.sqrt(2))
    assert directed_cutoff_distance(cut, [2.0, 0.0], None) == 0.0


def test_filter_orthogonality_angles():
    """Tests that of cuts at 0, 30 and 90 degrees the 30 degree cut is dropped."""
    # Arrange
    angle = math.radians(30)
    cuts = [
        Cut(coeffs=((0, 1.0),), rhs=0.0),
        Cut(coeffs=((0, math.cos(angle)), (1, math.sin(angle))), rhs=0.0),
        Cut(coeffs=((1, 1.0),), rhs=0.0),
    ]

    # Act
    kept = filter_orthogonality(cuts, 0.9)

    # Assert
    assert kept == [cuts[0], cuts[2]]


def test_filter_orthogonality_drops_duplicates():
    """Tests that a parallel copy of a kept cut is discarded."""
    cut = Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=1.0)
    kept = filter_orthogonality([cut, cut.scaled(2.0)], 0.9)
    assert kept == [cut]


def test_pairwise_efficacy_corner(corner_cuts):
    """Tests the distance to the corner of two orthogonal cuts."""
    c1, c2 = corner_cuts
    assert pairwise_efficacy(c1, c2, [0.0, 0.0]) == pytest.approx(math.sqrt(2))
    assert in_intersection_fan(c1, c2, [0.0, 0.0])


def test_pairwise_efficacy_unequal_corner():
    """Tests the Gram solve for efficacies 1 and 0.2."""
    c1 = Cut(coeffs=((0, -1.0),), rhs=-1.0)
    c2 = Cut(coeffs=((1, -1.0),), rhs=-0.2)
    assert pairwise_efficacy(c1, c2, [0.0, 0.0]) == pytest.approx(math.sqrt(1.04))


def test_pairwise_efficacy_identical_cuts():
    """Tests that a cut paired with itself gives its own efficacy."""
    cut = Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=1.0)
    value = pairwise_efficacy(cut, cut, [0.75, 0.75])
    assert value == pytest.approx(0.5 / math.sqrt(2))
    assert not in_intersection_fan(cut, cut, [0.75, 0.75])


def test_pairwise_efficacy_incompatible_cuts():
    """Tests that opposite cuts with an empty intersection are signalled."""
    c1 = Cut(coeffs=((0, 1.0),), rhs=-1.0)
    c2 = Cut(coeffs=((0, -1.0),), rhs=-1.0)
    with pytest.raises(IncompatibleCutsError):
        pairwise_efficacy(c1, c2, [0.0])


def _sampled_distance(c1, c2, x, half_width=20.0, samples=40001):
    """Nearest feasible point found by sampling both boundary lines in 2D."""
    best = math.inf
    for this, other in ((c1, c2), (c2, c1)):
        a = this.dense(2)
        foot = a * this.rhs / (a @ a)
        perp = np.array([-a[1], a[0]]) / np.linalg.norm(a)
        t = np.linspace(-half_width, half_width, samples)
        points = foot[None, :] + t[:, None] * perp[None, :]
        b = other.dense(2)
        feasible = points[points @ b <= other.rhs + 1e-12]
        if len(feasible):
            best = min(best, float(np.min(np.linalg.norm(feasible - x, axis=1))))
    return best


def test_pairwise_efficacy_matches_sampling_oracle():
    """Tests the closed form against a sampled projection on random 2D pairs."""
    # Arrange
    rng = np.random.default_rng(7)
    x = np.zeros(2)
    checked = 0

    while checked < 40:
        a1, a2 = rng.normal(size=2), rng.normal(size=2)
        a1, a2 = a1 / np.linalg.norm(a1), a2 / np.linalg.norm(a2)
        if a1 @ a2 < -0.8:
            continue
        c1 = Cut(coeffs=((0, a1[0]), (1, a1[1])), rhs=-rng.uniform(0.1, 1.0))
        c2 = Cut(coeffs=((0, a2[0]), (1, a2[1])), rhs=-rng.uniform(0.1, 1.0))

        # Act
        exact = pairwise_efficacy(c1, c2, x)
        sampled = _sampled_distance(c1, c2, x)

        # Assert
        assert exact == pytest.approx(sampled, abs=2e-3)
        assert exact >= max(c1.violation(x) / c1.norm(), c2.violation(x) / c2.norm()) - 1e-9
        assert exact == pytest.approx(pairwise_efficacy(c2, c1, x))
        checked += 1


def test_filter_dynamic_mingain(corner_cuts):
    """Tests that the corner pair survives a gain of 0.41 but not of 0.5."""
    # Act
    loose = filter_dynamic(list(corner_cuts), [0.0, 0.0], DynamicConfig(mingain=0.41))
    strict = filter_dynamic(list(corner_cuts), [0.0, 0.0], DynamicConfig(mingain=0.5))

    # Assert
    assert loose == list(corner_cuts)
    assert strict == [corner_cuts[0]]


def test_filter_dynamic_drops_duplicate_and_keeps_single():
    """Tests the trivial cases of the dynamic filter in both filter modes."""
    cut = Cut(coeffs=((0, 1.0),), rhs=0.0)
    for mode in (FilterMode.NORMAL, FilterMode.F):
        cfg = DynamicConfig(mingain=0.01, filtermode=mode)
        assert filter_dynamic([cut], [1.0], cfg) == [cut]
        assert filter_dynamic([cut, cut.scaled(3.0)], [1.0], cfg) == [cut]


def test_ensemble_density_filter():
    """Tests that cuts denser than max_density are never selected."""
    # Arrange
    problem = _problem(10)
    dense = Cut(coeffs=tuple((j, 1.0) for j in range(9)), rhs=0.0)
    sparse = Cut(coeffs=((0, 1.0),), rhs=0.0)

    # Act
    kept = select_ensemble([dense, sparse], [1.0] * 10, None, EnsembleConfig(), problem)

    # Assert
    assert kept == [sparse]


def test_ensemble_nnz_budget():
    """Tests that the nonzero budget stops selection after the first cut."""
    problem = _problem(10)
    cuts = [Cut(coeffs=((0, 1.0),), rhs=0.0), Cut(coeffs=((1, 1.0),), rhs=0.0)]
    kept = select_ensemble(cuts, [1.0] * 10, None, EnsembleConfig(nnz_budget=1), problem)
    assert len(kept) == 1


def test_ensemble_parallelism_penalty():
    """Tests that a parallel second cut loses a fifth of its score."""
    # Arrange
    problem = _problem(10)
    cuts = [Cut(coeffs=((0, 1.0),), rhs=0.0), Cut(coeffs=((0, 1.0),), rhs=0.0)]

    # Act
    kept = select_ensemble(cuts, [1.0] * 10, None, EnsembleConfig(), problem)

    # Assert
    assert len(kept) == 2
    assert kept[1].score == pytest.approx(0.8 * kept[0].score)


def _pseudo_costs(gain_x0, gain_x1):
    store = PseudoCostStore()
    for var, gain in ((0, gain_x0), (1, gain_x1)):
        store.update(var, Direction.DOWN, gain, 0.5)
        store.update(var, Direction.UP, gain, 0.5)
    return store


def test_ensemble_pseudo_gain_is_relative_to_the_round():
    """Tests that the pseudo-cost term is the cut's gain over the round's top gain."""
    # Arrange
    problem = _problem(4, integers=[0, 1])
    cuts = [Cut(coeffs=((1, 1.0),), rhs=0.0), Cut(coeffs=((0, 1.0),), rhs=0.0)]
    x_bar = [0.5, 0.5, 0.0, 0.0]

    # Act
    kept = select_ensemble(cuts, x_bar, _pseudo_costs(2.0, 1.0), EnsembleConfig(), problem)

    # Assert
    assert [c.coeffs for c in kept] == [((0, 1.0),), ((1, 1.0),)]
    # pseudo scores 4 and 1, so the second cut gets a quarter of w_pseudo
    assert kept[0].score - kept[1].score == pytest.approx(0.5 * (1.0 - 0.25))


def test_ensemble_ignores_pseudo_cost_magnitude():
    """Tests that multiplying every recorded gain by ten leaves the scores unchanged."""
    # Arrange
    problem = _problem(4, integers=[0, 1])
    x_bar = [0.5, 0.5, 0.0, 0.0]

    def cuts():
        return [Cut(coeffs=((0, 1.0),), rhs=0.0), Cut(coeffs=((1, 1.0),), rhs=0.0)]

    # Act
    small = select_ensemble(cuts(), x_bar, _pseudo_costs(2.0, 1.0), EnsembleConfig(), problem)
    large = select_ensemble(cuts(), x_bar, _pseudo_costs(20.0, 10.0), EnsembleConfig(), problem)

    # Assert
    assert [c.score for c in small] == pytest.approx([c.score for c in large])


@pytest.fixture
def mixed_cuts():
    return [
        Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=0.5),
        Cut(coeffs=((2, 1.0),), rhs=0.0),
        Cut(coeffs=((0, 1.0), (3, 2.0)), rhs=1.0),
        Cut(coeffs=((0, 1.0), (1, 1.0)), rhs=0.6),
    ]


@pytest.mark.parametrize(
    "selector",
    [HybridSelector(), DynamicSelector(), EnsembleSelector()],
    ids=["hybrid", "dynamic", "ensemble"],
)
def test_selectors_ignore_cut_scaling(selector, mixed_cuts):
    """Tests that rescaling a cut changes neither the kept set nor its order."""
    # Arrange
    problem = _problem(6, objective=[1.0, 0, 0, 0, 0, 0], integers=[0, 1, 2])
    ctx = SelectionContext(problem, [0.5] * 6)
    scaled = [cut.scaled(7.3) if i % 2 == 0 else cut.scaled(0.25) for i, cut in enumerate(mixed_cuts)]

    # Act
    kept = selector.select(mixed_cuts, ctx)
    kept_scaled = selector.select(scaled, ctx)

    # Assert
    assert kept
    assert [c.key() for c in kept] == [c.key() for c in kept_scaled]


def test_make_selector():
    """Tests that the configured selector kind is built."""
    assert isinstance(make_selector(SolverConfig()), HybridSelector)
    assert isinstance(make_selector(SolverConfig(cutsel=CutSelectorKind.DYNAMIC)), DynamicSelector)
    assert isinstance(make_selector(SolverConfig(cutsel=CutSelectorKind.ENSEMBLE)), EnsembleSelector)
