"""Tests for the approximation mechanisms and the revenue upper bound."""

from __future__ import annotations

import math

import numpy as np
import pytest

from bamlab.approx import (
    SigmaString,
    b_star,
    best_deterministic,
    corollary_alpha,
    example1_bam,
    example1_revenue,
    gap_instance,
    half_mix_bam,
    msm_bam,
    msm_revenue,
    revenue_upper_bound,
    sigma_bam,
    three_approx,
)
from bamlab.bam_engine import BamTrace, exact_totals, execute
from bamlab.errors import InvalidParameterError, SigmaEnumerationTooLargeError
from bamlab.model import (
    Instance,
    StageDistribution,
    path_table,
    path_values,
)


def _traces(instance: Instance, *bams: object) -> list:
    values = path_values(instance, path_table(instance).indices)
    return [execute(bam, values) for bam in bams]


def test_sigma_string_codes() -> None:
    """Bit ``t`` of the code drives stage ``t + 1``."""
    sigma = SigmaString.from_int(0b011, 3)
    assert sigma.bits == (1, 1, 0), "least significant bit first"
    assert sigma.code == 3, "code inverts from_int"
    assert str(sigma.flip_prefix(3)) == "000", "first two stages flip"
    with pytest.raises(InvalidParameterError):
        SigmaString((0, 2))


def test_upper_bound_on_one_stage_is_benchmark(single_stage: Instance) -> None:
    """With one stage the account has nothing to spend."""
    bound = revenue_upper_bound(single_stage)
    assert bound.expected_spend_star == 0.0, "no spend before any deposit"
    assert bound.total == pytest.approx(0.75), "bound equals the optimal price"


def test_upper_bound_adds_oracle_spend(two_stage: Instance) -> None:
    """Two uniform {1, 2} stages: benchmark 2 plus spend 1.25."""
    bound = revenue_upper_bound(two_stage)
    assert bound.msm_revenue == pytest.approx(2.0), "two prices of 1"
    assert bound.total == pytest.approx(3.25), "benchmark plus oracle spend"


@pytest.mark.parametrize(
    ("factory", "share"), [(three_approx, 3.0), (half_mix_bam, 2.0)]
)
def test_account_tracks_the_spend_oracle(
    three_value_two_stage: Instance, factory: object, share: float
) -> None:
    """Balances, spends and deposits are a fixed share of the oracle's."""
    instance = three_value_two_stage
    mixed, oracle = _traces(instance, factory(instance), b_star(instance))
    for field in ("balances", "spends", "deposits"):
        np.testing.assert_allclose(
            getattr(mixed, field),
            getattr(oracle, field) / share,
            atol=1e-12,
            err_msg=f"{field} should scale by 1/{share}",
        )


def test_three_approx_revenue_bracket(three_value_two_stage: Instance) -> None:
    """The mixture earns at least a third of the upper bound."""
    instance = three_value_two_stage
    revenue = exact_totals(three_approx(instance), instance).revenue
    bound = revenue_upper_bound(instance).total
    assert bound / 3.0 - 1e-9 <= revenue <= bound + 1e-9, "revenue within bounds"


def test_benchmark_bam_matches_stage_revenues(three_value_two_stage: Instance) -> None:
    """The idle-account BAM earns exactly the benchmark revenue."""
    instance = three_value_two_stage
    revenue = exact_totals(msm_bam(instance), instance).revenue
    assert revenue == pytest.approx(msm_revenue(instance)), "idle account"


def test_alpha_mix_weights_and_validation(two_stage: Instance) -> None:
    """``α = 1/2`` mixes ``1/2, 1/4, 1/4``; ``α`` outside (0, 1] is rejected."""
    bam = corollary_alpha(two_stage, None, 0.5)
    weights = bam.policies[0].weights
    assert (weights.stage, weights.free, weights.bundle) == pytest.approx(
        (0.5, 0.25, 0.25)
    ), "weights should follow 1/(2α+1) and α/(2α+1)"
    assert bam.name == "alpha_mix[0.5]", "name carries α"
    with pytest.raises(InvalidParameterError):
        corollary_alpha(two_stage, None, 1.5)


def test_sigma_bam_is_deterministic(three_value_two_stage: Instance) -> None:
    """Give-for-free and spend-and-price stages allocate integrally."""
    instance = three_value_two_stage
    (trace,) = _traces(instance, sigma_bam(instance, SigmaString((0, 1))))
    for alloc in trace.allocations:
        assert np.isin(alloc, (0.0, 1.0)).all(), "allocations are 0 or 1"
    assert trace.spends[:, 0].max() == 0.0, "nothing to spend at stage 1"


def test_best_deterministic_beats_the_benchmark(
    three_value_two_stage: Instance,
) -> None:
    """The winner earns at least the benchmark and records its guarantee."""
    instance = three_value_two_stage
    choice = best_deterministic(instance)
    assert choice.revenue >= msm_revenue(instance) - 1e-12, "benchmark is a candidate"
    assert choice.guarantee == pytest.approx(0.2), "α/(4α+1) with α = 1"
    threaded = best_deterministic(instance, workers=3)
    assert threaded.revenue == choice.revenue, "workers do not change the winner"
    assert threaded.mechanism.name == choice.mechanism.name, "same tie-break"


def test_best_deterministic_caps_the_horizon() -> None:
    """Horizons above 20 are refused before any enumeration."""
    point = StageDistribution.discrete([1.0], [1.0])
    with pytest.raises(SigmaEnumerationTooLargeError):
        best_deterministic(Instance((point,) * 21))


@pytest.mark.parametrize("log_v_max", [2.0, 3.0])
def test_example1_revenue_closed_form(log_v_max: float) -> None:
    """Quadrature agrees with ``2 + ln(1 + ln v_max)``."""
    revenue = example1_revenue(math.exp(log_v_max))
    assert revenue == pytest.approx(2.0 + math.log1p(log_v_max), abs=1e-8), (
        "quadrature should match the closed form"
    )


def test_example1_rejects_small_v_max() -> None:
    """``v_max`` must exceed 1."""
    with pytest.raises(InvalidParameterError):
        example1_revenue(1.0)


def test_gap_instance_layout() -> None:
    """Worthless stages sit between the two equal-revenue stages."""
    instance = gap_instance(10.0, zero_stages=2)
    assert instance.horizon == 4, "two equal-revenue stages plus two gaps"
    assert not instance.is_discrete, "equal-revenue stages are continuous"
    assert example1_bam(10.0, zero_stages=2).horizon == 4, "one policy per stage"


def _sigma_traces(instance: Instance) -> dict[int, BamTrace]:
    """Trace of every sigma BAM over the whole path table, keyed by code."""
    values = path_values(instance, path_table(instance).indices)
    horizon = instance.horizon
    return {
        code: execute(sigma_bam(instance, SigmaString.from_int(code, horizon)), values)
        for code in range(2**horizon)
    }


@pytest.fixture(params=["two_stage", "three_value_two_stage", "three_stage"])
def small_instance(request: pytest.FixtureRequest) -> Instance:
    """The shared two-stage instances and a three-stage one with a zero value."""
    if request.param == "three_stage":
        return Instance(
            (
                StageDistribution.discrete([0.0, 1.0, 3.0], [0.2, 0.5, 0.3]),
                StageDistribution.discrete([2.0, 5.0], [0.6, 0.4]),
                StageDistribution.discrete([1.0, 4.0], [0.5, 0.5]),
            )
        )
    return request.getfixturevalue(request.param)


def test_flipped_prefix_balances_cover_the_oracle(small_instance: Instance) -> None:
    """A sigma BAM and its prefix flip together hold at least the oracle balance."""
    instance = small_instance
    values = path_values(instance, path_table(instance).indices)
    star = execute(b_star(instance), values)
    traces = _sigma_traces(instance)
    for code, trace in traces.items():
        sigma = SigmaString.from_int(code, instance.horizon)
        for stage in range(1, instance.horizon + 1):
            twin = traces[sigma.flip_prefix(stage).code]
            paired = trace.balances[:, stage - 1] + twin.balances[:, stage - 1]
            assert (paired >= star.balances[:, stage - 1] - 1e-9).all(), (
                f"{sigma} and its flip fall short of the oracle at stage {stage}"
            )


def test_average_sigma_spend_is_a_quarter_of_the_oracle(
    small_instance: Instance,
) -> None:
    """Averaged over all sigma strings, every path spends ``s*_t / 4`` per stage."""
    instance = small_instance
    values = path_values(instance, path_table(instance).indices)
    star = execute(b_star(instance), values)
    spends = np.mean([trace.spends for trace in _sigma_traces(instance).values()], 0)
    assert spends.shape == star.spends.shape, "one spend per path and stage"
    assert (spends >= 0.25 * star.spends - 1e-9).all(), (
        "average sigma spend must cover a quarter of the oracle spend"
    )
