"""The sandwich search brackets random concave functions within its query budget."""

from __future__ import annotations

import numpy as np
import pytest

from bamlab.piecewise import PiecewiseLinearConcave, SandwichEnds, query_bound, sandwich

pytestmark = pytest.mark.slow

SEEDS = range(20)
GRID = 10_000


def _random_concave(seed: int) -> PiecewiseLinearConcave:
    """Up to eight pieces on ``[0, B]`` with strictly decreasing slopes."""
    rng = np.random.default_rng(seed)
    pieces = int(rng.integers(2, 9))
    width = float(rng.uniform(1.0, 10.0))
    inner = np.sort(rng.choice(np.arange(1, 1000), size=pieces - 1, replace=False))
    xs = np.concatenate(([0.0], inner / 1000.0 * width, [width]))
    slopes = np.sort(rng.uniform(-5.0, 5.0, size=pieces))[::-1]
    ys = np.concatenate(([rng.uniform(0.0, 2.0)], np.diff(xs) * slopes))
    return PiecewiseLinearConcave(xs, np.cumsum(ys))


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("delta", [0.01, 0.1])
def test_sandwich_on_random_concave_functions(seed: int, delta: float) -> None:
    """Bounds hold on a dense grid, are δ apart and stay within budget."""
    func = _random_concave(seed)
    a, b = func.domain
    slopes = func.slopes
    ends = SandwichEnds(a, b, float(func(a)), float(func(b)), slopes[0], slopes[-1])
    result = sandwich(func, ends, delta)

    xs = np.linspace(a, b, GRID)
    truth = np.asarray(func(xs))
    assert (result.lower(xs) <= truth + 1e-9).all(), "lower bound must stay below"
    assert (truth <= result.upper(xs) + 1e-9).all(), "upper bound must stay above"
    np.testing.assert_allclose(
        np.asarray(result.upper(xs)) - np.asarray(result.lower(xs)),
        delta,
        atol=1e-9,
        err_msg="the bounds should be δ apart",
    )
    knots = func.breakpoints
    chord = ends.f_a + (ends.f_b - ends.f_a) * (knots - a) / (b - a)
    peak = float(np.max(func.values - chord))
    assert result.queries <= query_bound(ends, peak, delta), (
        f"{result.queries} queries exceed the budget"
    )
