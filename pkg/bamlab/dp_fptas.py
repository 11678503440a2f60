"""Optimal dynamic mechanisms for discrete one-item stages.

A backward dynamic program over the buyer's promised utility ``ξ``. Each
stage value ``φ_t(ξ)`` is the optimum of a small LP over mixtures of posted
prices at the support points, with the next stage's value encoded through
epigraph variables. Every ``φ_t`` is concave, so it is bracketed by the
adaptive sandwich of :mod:`bamlab.piecewise` and the bracket widens by one
tolerance per stage.
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses as dc
import functools
import itertools
import logging
import typing as typ

import numpy as np

from bamlab.errors import (
    InvalidParameterError,
    PromiseUnderflowError,
    UnsupportedMultiItemError,
)
from bamlab.lp import LinearProgram, solve_lp
from bamlab.model import DirectMechanism, StageOutcome
from bamlab.piecewise import PiecewiseLinearConcave, SandwichEnds, sandwich
from bamlab.stage_mechs import myerson_stage, stage_totals

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.model import History, Instance, StageDistribution
    from bamlab.piecewise import Mapper

logger = logging.getLogger(__name__)

PROMISE_TOL = 1e-9
WEIGHT_TOL = 1e-10
MAX_ATTEMPTS = 20


@dc.dataclass(frozen=True, eq=False)
class LpStage:
    """LP data of one stage over its sorted positive-probability values.

    A zero value is always present (with probability zero if the stage lacks
    one). ``utility[i, j]`` is ``(v_i − v_j)^+``; ``promise_rows`` subtracts
    the expected utility so that ``g = ξ + promise_rows @ w``.
    """

    values: np.ndarray
    probs: np.ndarray
    utility: np.ndarray
    promise_rows: np.ndarray
    revenue: np.ndarray
    slope_bound: float


@dc.dataclass(frozen=True, eq=False)
class StageSolution:
    """Optimal posted-price mixture at one promise, mapped onto the support.

    ``allocations``, ``utilities`` and ``promises`` are indexed by the
    stage's own support order; ``weights`` by the sorted LP values.
    """

    xi: float
    value: float
    weights: np.ndarray
    allocations: np.ndarray
    utilities: np.ndarray
    expected_utility: float

    @property
    def promises(self) -> np.ndarray:
        """Promise ``g = ξ + û − E[û]`` handed to the next stage."""
        return self.xi + self.utilities - self.expected_utility


@dc.dataclass(frozen=True, eq=False)
class SolvedPolicy:
    """Lower value functions, their gaps and the optimal initial promise."""

    instance: Instance
    lowers: tuple[PiecewiseLinearConcave, ...]
    gaps: tuple[float, ...]
    xi_star: float
    value_lower: float
    value_upper: float
    epsilon: float
    delta: float
    lp_count: int
    breakpoint_counts: tuple[int, ...]

    def upper(self, t: int) -> PiecewiseLinearConcave:
        """Upper bound of the stage-``t`` value function."""
        return self.lowers[t].shifted(self.gaps[t])

    def mixture(self, t: int, xi: float) -> StageSolution:
        """Posted-price mixture of stage ``t`` at promise ``xi``."""
        return stage_value(xi, self.instance.stages[t], self.lowers[t + 1])


@functools.cache
def lp_stage(dist: StageDistribution) -> LpStage:
    """Build the LP data of a one-item discrete stage."""
    support = dist.support[:, 0]
    keep = dist.probs > 0
    values, probs = support[keep], dist.probs[keep]
    if not np.isclose(values, 0.0, atol=1e-12).any():
        values = np.concatenate([[0.0], values])
        probs = np.concatenate([[0.0], probs])
    order = np.argsort(values)
    values, probs = values[order], probs[order]
    utility = np.maximum(values[:, np.newaxis] - values[np.newaxis, :], 0.0)
    revenue = np.cumsum((probs * values)[::-1])[::-1]
    ratios = [
        probs[i] * values[i + 1] / (probs[i + 1] * (values[i + 1] - values[i]))
        for i in range(values.shape[0] - 1)
    ]
    return LpStage(
        values,
        probs,
        utility,
        utility - probs @ utility,
        revenue,
        max(ratios, default=0.0),
    )


def _program(
    xi: float, stage: LpStage, lines: list[tuple[float, float]]
) -> LinearProgram:
    """Variables ``[w, ζ]``; each ``ζ_i`` sits under every line of the next value.

    Maximizing keeps ``ζ_i`` on the minimum of the lines, which equals the
    concave next-stage value at ``g_i``.
    """
    k = stage.values.shape[0]
    g_rows = stage.promise_rows
    rows = [np.hstack([-g_rows, np.zeros((k, k))])]
    rhs = [np.full(k, xi)]
    eye = np.eye(k)
    for slope, intercept in lines:
        rows.append(np.hstack([-slope * g_rows, eye]))
        rhs.append(np.full(k, slope * xi + intercept))
    return LinearProgram(
        objective=np.concatenate([stage.revenue, stage.probs]),
        a_ub=np.vstack(rows),
        b_ub=np.concatenate(rhs),
        a_eq=np.concatenate([np.ones(k), np.zeros(k)])[np.newaxis, :],
        b_eq=np.array([1.0]),
        bounds=[(0.0, None)] * k + [(None, None)] * k,
    )


def _value_lines(phi_next: PiecewiseLinearConcave) -> list[tuple[float, float]]:
    """Pieces of ``phi_next`` plus the slope −1 continuation past its domain."""
    end, at_end = phi_next.domain[1], float(phi_next.values[-1])
    return [*phi_next.lines(), (-1.0, at_end + end)]


def stage_value(
    xi: float, dist: StageDistribution, phi_next: PiecewiseLinearConcave
) -> StageSolution:
    """Best posted-price mixture for promise ``xi`` given the next stage value."""
    if xi < -PROMISE_TOL:
        msg = f"Promised utility must be non-negative; got {xi}."
        raise InvalidParameterError(msg)
    xi = max(xi, 0.0)
    stage = lp_stage(dist)
    k = stage.values.shape[0]
    result = solve_lp(_program(xi, stage, _value_lines(phi_next)))
    raw = result.values[:k]
    if (raw < -WEIGHT_TOL).any() or (raw > 1 + WEIGHT_TOL).any():
        logger.warning("Clamping mixture weights %s into [0, 1]", raw.tolist())
    weights = np.clip(raw, 0.0, 1.0)
    support = dist.support[:, 0]
    gaps = support[:, np.newaxis] - stage.values[np.newaxis, :]
    reach = gaps >= -1e-12
    return StageSolution(
        xi=xi,
        value=result.objective_value,
        weights=weights,
        allocations=np.clip(reach @ weights, 0.0, 1.0),
        utilities=(np.maximum(gaps, 0.0) * reach) @ weights,
        expected_utility=float(stage.probs @ (stage.utility @ weights)),
    )


def _require_one_item(instance: Instance) -> None:
    instance.require_discrete("The dynamic program")
    for t, stage in enumerate(instance.stages):
        if stage.items != 1:
            msg = f"Stage {t + 1} sells {stage.items} items; one is supported."
            raise UnsupportedMultiItemError(msg)


def _counted_oracle(
    dist: StageDistribution,
    phi_next: PiecewiseLinearConcave,
    counter: cabc.Iterator[int],
) -> cabc.Callable[[float], float]:
    def _evaluate(xi: float) -> float:
        next(counter)
        return stage_value(xi, dist, phi_next).value

    return _evaluate


def _run_passes(
    instance: Instance, epsilon: float, delta: float, mapper: Mapper
) -> SolvedPolicy:
    horizon = instance.horizon
    vals = instance.vals
    remaining = np.concatenate([np.cumsum(vals[::-1])[::-1], [0.0]])
    slope_sums = np.cumsum(
        [lp_stage(stage).slope_bound for stage in instance.stages][::-1]
    )[::-1]
    counter = itertools.count()
    lowers: list[PiecewiseLinearConcave] = [
        PiecewiseLinearConcave.linear((0.0, 1.0), (0.0, -1.0))
    ]
    gaps = [0.0]
    counts = []
    for t in range(horizon - 1, -1, -1):
        width = float(remaining[t]) if remaining[t] > 0 else 1.0
        oracle = _counted_oracle(instance.stages[t], lowers[0], counter)
        f_a, f_b = oracle(0.0), oracle(width)
        chord = (f_b - f_a) / width
        ends = SandwichEnds(
            0.0, width, f_a, f_b, max(float(slope_sums[t]), chord), -1.0
        )
        result = sandwich(oracle, ends, delta, mapper)
        lowers.insert(0, result.lower)
        gaps.insert(0, gaps[0] + delta)
        counts.insert(0, len(result.lower.breakpoints))
        logger.info(
            "Stage %d bracketed with %d breakpoints after %d queries",
            t + 1,
            counts[0],
            result.queries,
        )
    xi_star, value_lower = lowers[0].argmax()
    return SolvedPolicy(
        instance=instance,
        lowers=tuple(lowers),
        gaps=tuple(gaps),
        xi_star=xi_star,
        value_lower=value_lower,
        value_upper=value_lower + gaps[0],
        epsilon=epsilon,
        delta=delta,
        lp_count=next(counter),
        breakpoint_counts=tuple(counts),
    )


def backward_dp(instance: Instance, epsilon: float, workers: int = 1) -> SolvedPolicy:
    """Bracket the optimal revenue within a ``1 − ε`` factor.

    The per-stage tolerance starts at ``ε·M/(2T)`` with ``M`` the revenue of
    the per-stage optimal prices, and halves until the final bracket width is
    at most ``ε`` times its lower end.
    """
    _require_one_item(instance)
    if not 0.0 < epsilon < 1.0:
        msg = f"epsilon must lie in (0, 1); got {epsilon}."
        raise InvalidParameterError(msg)
    benchmark = sum(
        stage_totals(myerson_stage(stage), stage).revenue for stage in instance.stages
    )
    delta = epsilon * max(benchmark, 1e-9) / (2 * instance.horizon)
    with cf.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        mapper = pool.map if workers > 1 else map
        for _ in range(MAX_ATTEMPTS):
            policy = _run_passes(instance, epsilon, delta, mapper)
            if policy.gaps[0] <= epsilon * max(policy.value_lower, 1e-9):
                return policy
            delta /= 2.0
            logger.info("Bracket too wide; retrying with tolerance %.3g", delta)
    logger.warning("Bracket still wider than requested after %d attempts", MAX_ATTEMPTS)
    return policy


def extract_mechanism(policy: SolvedPolicy, instance: Instance) -> DirectMechanism:
    """Re-solve every node forward from ``ξ*`` and tabulate the mechanism.

    Payments are ``y·v − û + E[û]`` with ``ξ*`` rebated at the first stage,
    so the utility banked after each stage equals the next promise.
    """
    _require_one_item(instance)
    nodes: dict[History, StageOutcome] = {}
    frontier: dict[History, float] = {(): policy.xi_star}
    for t, stage in enumerate(instance.stages):
        rebate = policy.xi_star if t == 0 else 0.0
        upcoming: dict[History, float] = {}
        for history, xi in frontier.items():
            sol = stage_value(xi, stage, policy.lowers[t + 1])
            promises = sol.promises
            for i, value in enumerate(stage.support[:, 0].tolist()):
                if promises[i] < -PROMISE_TOL:
                    msg = f"Promise {promises[i]} at {history + (i,)} is negative."
                    raise PromiseUnderflowError(msg)
                alloc = float(sol.allocations[i])
                pay = alloc * value - sol.utilities[i] + sol.expected_utility - rebate
                nodes[history + (i,)] = StageOutcome(np.array([alloc]), pay)
                upcoming[history + (i,)] = max(float(promises[i]), 0.0)
        frontier = upcoming
    return DirectMechanism(nodes)


__all__ = [
    "LpStage",
    "SolvedPolicy",
    "StageSolution",
    "backward_dp",
    "extract_mechanism",
    "lp_stage",
    "stage_value",
]
