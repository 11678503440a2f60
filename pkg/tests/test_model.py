"""Unit tests for instances, histories and exact expectations."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bamlab.errors import (
    BadHistoryError,
    IncompleteMechanismError,
    InvalidDistributionError,
    InvalidParameterError,
    UnsupportedContinuousError,
)
from bamlab.model import (
    DirectMechanism,
    Instance,
    StageDistribution,
    StageOutcome,
    conditional_utilities,
    conditional_utility,
    enumerate_paths,
    expected_totals,
    random_instance,
    sample_history,
    sample_path,
    tree_levels,
)
from tests.conftest import posted_price_mechanism


@pytest.mark.parametrize(
    ("support", "probs"),
    [
        ([1.0, 2.0], [0.5, 0.6]),
        ([1.0, 1.0], [0.5, 0.5]),
        ([-1.0, 2.0], [0.5, 0.5]),
        ([1.0, 2.0], [0.5]),
        ([], []),
    ],
)
def test_discrete_stage_rejects_bad_inputs(
    support: list[float], probs: list[float]
) -> None:
    """Malformed discrete stages never construct."""
    with pytest.raises(InvalidDistributionError):
        StageDistribution.discrete(support, probs)


def test_equal_revenue_val_and_quantile() -> None:
    """Equal-revenue stages expose ``1 + ln v_max`` and an atom at the top."""
    stage = StageDistribution.equal_revenue(math.e**2)
    assert stage.val == pytest.approx(3.0), "Val should be 1 + ln v_max"
    values = stage.quantile(np.array([0.0, 0.5, 0.99]))[:, 0]
    assert values[0] == pytest.approx(1.0), "u = 0 should map to value 1"
    assert values[1] == pytest.approx(2.0), "u = 1/2 should map to value 2"
    assert values[2] == pytest.approx(math.e**2), "top uniforms hit the atom"


def test_equal_revenue_requires_v_max_above_one() -> None:
    """``v_max <= 1`` is rejected."""
    with pytest.raises(InvalidDistributionError):
        StageDistribution.equal_revenue(1.0)


def test_equal_revenue_has_no_finite_support() -> None:
    """Asking a continuous stage for its support is an error."""
    with pytest.raises(UnsupportedContinuousError):
        _ = StageDistribution.equal_revenue(5.0).support


def test_node_count_and_levels(three_point_stage: StageDistribution) -> None:
    """Levels enumerate histories lexicographically."""
    pair = StageDistribution.discrete([1.0, 2.0], [0.5, 0.5])
    instance = Instance((pair, three_point_stage))
    assert instance.node_count == 8, "2 + 2·3 non-root nodes expected"
    levels = tree_levels(instance)
    assert levels[1] == [(0,), (1,)], "first level should list stage-1 points"
    assert levels[2][:3] == [(0, 0), (0, 1), (0, 2)], "order is lexicographic"


def test_path_probabilities_sum_to_one(two_stage: Instance) -> None:
    """Path enumeration covers the whole probability mass."""
    total = sum(prob for _, prob in enumerate_paths(two_stage))
    assert total == pytest.approx(1.0), "path probabilities must sum to one"


def test_validate_history_rejects_unknown_points(two_stage: Instance) -> None:
    """Out-of-range indices and over-long histories are bad histories."""
    with pytest.raises(BadHistoryError):
        two_stage.validate_history((2,))
    with pytest.raises(BadHistoryError):
        two_stage.validate_history((0, 0, 0))


def test_stage_outcome_clips_noise_and_rejects_overallocation() -> None:
    """Tiny negative allocations are clipped; larger violations raise."""
    outcome = StageOutcome(np.array([-1e-12]), 0.0)
    assert outcome.allocation[0] == 0.0, "rounding noise should be clipped"
    with pytest.raises(InvalidParameterError):
        StageOutcome(np.array([1.5]), 0.0)


def test_missing_node_is_incomplete(single_stage: Instance) -> None:
    """A mechanism without an outcome for a node cannot be evaluated."""
    mech = DirectMechanism({(0,): StageOutcome(np.array([0.0]), 0.0)})
    with pytest.raises(IncompleteMechanismError):
        expected_totals(mech, single_stage)


def test_expected_totals_of_posted_price(single_stage: Instance) -> None:
    """Price 1 on {0, 1, 2} earns 0.75 and leaves utility 0.25."""
    mech = posted_price_mechanism(single_stage, [1.0])
    totals = expected_totals(mech, single_stage)
    assert totals.revenue == pytest.approx(0.75), "revenue of price 1"
    assert totals.utility == pytest.approx(0.25), "utility of price 1"
    assert totals.welfare == pytest.approx(1.0), "welfare of price 1"


def test_conditional_utility_at_root_is_expected_utility(two_stage: Instance) -> None:
    """``Utl(M | ∅)`` equals the expected utility."""
    mech = posted_price_mechanism(two_stage, [1.0, 2.0])
    root = conditional_utility(mech, two_stage, ())
    assert root == pytest.approx(expected_totals(mech, two_stage).utility), (
        "root conditional utility should match the expectation"
    )
    assert conditional_utility(mech, two_stage, (1,)) == pytest.approx(1.0), (
        "stage-1 surplus 1 with nothing left at price 2"
    )


def test_sampling_is_deterministic(two_stage: Instance) -> None:
    """Sampled paths depend only on seed and index."""
    first = sample_path(two_stage, 7, 12345)
    again = sample_path(two_stage, 7, 12345)
    for left, right in zip(first, again, strict=True):
        np.testing.assert_array_equal(left, right)
    history = sample_history(two_stage, 7, 12345)
    values = [float(v[0]) for v in first]
    expected = [float(two_stage.stages[t].support[i, 0]) for t, i in enumerate(history)]
    assert values == expected, "index sampling should match value sampling"


@pytest.mark.parametrize("seed", range(5))
def test_random_instances_respect_their_limits(seed: int) -> None:
    """Seeded instances are reproducible one-item trees within the size limits."""
    instance = random_instance(seed, max_horizon=4, max_size=2)
    assert 1 <= instance.horizon <= 4, "horizon within limits"
    for stage in instance.stages:
        assert stage.items == 1, "one item per stage"
        assert 1 <= stage.size <= 2, "support within limits"
        assert (stage.support >= 0).all() and (stage.support <= 10).all(), (
            "values lie in [0, 10]"
        )
    again = random_instance(seed, max_horizon=4, max_size=2)
    assert again.node_count == instance.node_count, "same seed, same tree"


@pytest.mark.parametrize("seed", range(5))
def test_conditional_utility_obeys_total_expectation(seed: int) -> None:
    """Every node's utility is the probability-weighted mean over its children."""
    rng = np.random.default_rng(seed)
    instance = random_instance(seed, max_horizon=3, max_size=3)
    levels = tree_levels(instance)
    mech = DirectMechanism(
        {
            history: StageOutcome(
                np.array([rng.uniform(0.0, 1.0)]), float(rng.uniform(-1.0, 3.0))
            )
            for level in levels[1:]
            for history in level
        }
    )
    utilities = conditional_utilities(mech, instance)
    for t, stage in enumerate(instance.stages):
        for history in levels[t]:
            children = [utilities[history + (i,)] for i in range(stage.size)]
            assert utilities[history] == pytest.approx(
                float(stage.probs @ np.array(children)), abs=1e-9
            ), f"total expectation fails at {history}"
    assert utilities[()] == pytest.approx(
        expected_totals(mech, instance).utility, abs=1e-9
    ), "root utility should match the expectation"
