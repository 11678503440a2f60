"""Pytest fixtures shared across the bamlab tests."""

from __future__ import annotations

import typing as typ

import numpy as np
import pytest

from bamlab.model import (
    DirectMechanism,
    Instance,
    StageDistribution,
    StageOutcome,
    random_instance,
)

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    InstanceFactory = cabc.Callable[[int], Instance]


def build_random_instance(
    seed: int, max_horizon: int = 3, max_size: int = 3
) -> Instance:
    """Seeded random instance shared by the acceptance suite."""
    return random_instance(seed, max_horizon, max_size)


def posted_price_mechanism(instance: Instance, prices: list[float]) -> DirectMechanism:
    """History-independent posted prices, one per stage, on one-item stages."""
    nodes = {}
    for path_len in range(1, instance.horizon + 1):
        stage = instance.stages[path_len - 1]
        price = prices[path_len - 1]
        for history in _histories(instance, path_len):
            value = float(stage.support[history[-1], 0])
            sold = value >= price
            nodes[history] = StageOutcome(
                np.array([1.0 if sold else 0.0]), price if sold else 0.0
            )
    return DirectMechanism(nodes)


def _histories(instance: Instance, length: int) -> list[tuple[int, ...]]:
    histories: list[tuple[int, ...]] = [()]
    for stage in instance.stages[:length]:
        histories = [h + (i,) for h in histories for i in range(stage.size)]
    return histories


@pytest.fixture
def three_point_stage() -> StageDistribution:
    """Values 0, 1, 2 with probabilities 1/4, 1/2, 1/4."""
    return StageDistribution.discrete([0.0, 1.0, 2.0], [0.25, 0.5, 0.25])


@pytest.fixture
def single_stage(three_point_stage: StageDistribution) -> Instance:
    """One stage whose optimal revenue is 0.75 at price 1."""
    return Instance((three_point_stage,))


@pytest.fixture
def two_stage() -> Instance:
    """Two independent stages uniform on {1, 2}."""
    stage = StageDistribution.discrete([1.0, 2.0], [0.5, 0.5])
    return Instance((stage, stage))


@pytest.fixture
def three_value_two_stage() -> Instance:
    """Two stages uniform on {1, 2, 4}."""
    stage = StageDistribution.discrete([1.0, 2.0, 4.0], [1 / 3, 1 / 3, 1 / 3])
    return Instance((stage, stage))


@pytest.fixture
def random_instance() -> InstanceFactory:
    """Factory building the seeded random instances of the acceptance suite."""
    return build_random_instance
