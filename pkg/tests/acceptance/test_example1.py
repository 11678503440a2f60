"""Equal-revenue gap example: the BAM beats every history-independent mechanism."""

from __future__ import annotations

import math

import pytest

from bamlab.approx import example1_bam, example1_revenue, gap_instance
from bamlab.verify import monte_carlo

pytestmark = pytest.mark.slow

HISTORY_INDEPENDENT_CAP = 2.0
V_MAX = [math.e**2, math.e**3, 50.0]


def _closed_form(v_max: float) -> float:
    """Price-1 revenue plus ``E[min(v − 1, ln v_max)] = ln(1 + ln v_max)``."""
    return 2.0 + math.log1p(math.log(v_max))


@pytest.mark.parametrize("v_max", V_MAX)
def test_quadrature_matches_the_closed_form(v_max: float) -> None:
    """Numerical integration agrees with the analytic revenue."""
    revenue = example1_revenue(v_max)
    assert revenue == pytest.approx(_closed_form(v_max), abs=1e-8), (
        "quadrature should agree with ln(1 + ln v_max)"
    )
    assert revenue > HISTORY_INDEPENDENT_CAP, "the BAM beats the cap of 2"


@pytest.mark.parametrize("v_max", V_MAX)
def test_monte_carlo_within_one_percent(v_max: float) -> None:
    """A million sampled paths land within 1% of the exact revenue."""
    result = monte_carlo(example1_bam(v_max), gap_instance(v_max), 1_000_000, seed=7)
    exact = example1_revenue(v_max)
    assert abs(result.revenue_mean - exact) <= 0.01 * exact, (
        f"estimate {result.revenue_mean} is not within 1% of {exact}"
    )
    assert result.revenue_mean > HISTORY_INDEPENDENT_CAP, "estimate beats the cap"


def test_log_log_estimate_is_a_lower_order_match() -> None:
    """``2 + ln ln v_max`` is within one unit of the exact revenue."""
    v_max = math.e**3
    assert abs(example1_revenue(v_max) - (2.0 + math.log(math.log(v_max)))) <= 1.0, (
        "the asymptotic estimate should be within one unit"
    )


def test_worthless_stages_do_not_change_revenue() -> None:
    """Zero-value stages between the two sales leave the revenue unchanged."""
    v_max = 50.0
    result = monte_carlo(
        example1_bam(v_max, zero_stages=3),
        gap_instance(v_max, zero_stages=3),
        200_000,
        seed=3,
    )
    assert abs(result.revenue_mean - example1_revenue(v_max)) <= 5 * result.stderr, (
        "the balance carries across idle stages"
    )
