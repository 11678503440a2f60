"""Ground-truth oracles and property checkers.

Checkers walk the discrete history tree exhaustively and return a
:class:`~bamlab.report.VerificationReport`; they never raise on a violated
property. The brute-force LP gives the optimal randomized dynamic mechanism
on small trees, and Monte Carlo covers instances with equal-revenue stages.
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses as dc
import enum
import logging
import math
import types
import typing as typ

import numpy as np
from scipy import sparse

from bamlab.bam_engine import GROUP_TOL, execute
from bamlab.config import resolve_node_cap
from bamlab.errors import BadHistoryError, InstanceTooLargeError, InvalidParameterError
from bamlab.lp import LinearProgram, solve_lp
from bamlab.model import (
    SAMPLE_BLOCK,
    DirectMechanism,
    StageOutcome,
    continuation_utilities,
    enumerate_paths,
    history_probability,
    node_utility,
    path_table,
    path_values,
    sample_block,
    tree_levels,
)
from bamlab.report import ReportBuilder, VerificationReport, Witness

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.bam_engine import BankAccountMechanism, StagePolicy
    from bamlab.model import History, Instance, StageDistribution

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-7
STRICT_TOL = 1e-12
MAX_SEARCH_NODES = 200
SEARCH_TOL = 1e-12
BAM_CHECKS = (
    "bam_ic",
    "bam_spend_identity",
    "bam_ir",
    "bam_spend",
    "bam_deposit",
    "bam_charge",
)


class IrMode(enum.StrEnum):
    """Which individual-rationality notion :func:`check_ir` enforces."""

    EXPOST = "expost"
    STAGEWISE = "stagewise"


def check_ic(
    mech: DirectMechanism, instance: Instance, tol: float = DEFAULT_TOL
) -> VerificationReport:
    """Stage-wise IC: no single-stage misreport beats truth plus truthful play.

    Witnesses name the true node ``h·i`` and the misreport ``(j,)``; ``lhs``
    is the truthful utility and ``rhs`` the deviation utility.
    """
    mech.require_complete(instance)
    cont = continuation_utilities(mech, instance)
    builder = ReportBuilder(("stagewise_ic",), tol)
    for t, level in enumerate(tree_levels(instance)[:-1]):
        support = instance.stages[t].support
        for history in level:
            for i, values in enumerate(support):
                truth = history + (i,)
                lhs = mech.outcome(truth).utility(values) + cont[truth]
                for j in range(support.shape[0]):
                    if j == i:
                        continue
                    lie = history + (j,)
                    rhs = mech.outcome(lie).utility(values) + cont[lie]
                    builder.require(Witness("stagewise_ic", truth, (j,), lhs, rhs))
    return builder.build()


def check_ir(
    mech: DirectMechanism,
    instance: Instance,
    mode: IrMode = IrMode.EXPOST,
    tol: float = DEFAULT_TOL,
) -> VerificationReport:
    """Ex-post IR over every path; stage-wise mode also checks every node."""
    mech.require_complete(instance)
    mode = IrMode(mode)
    checks = ["expost_ir"]
    if mode is IrMode.STAGEWISE:
        checks.append("stagewise_ir")
    builder = ReportBuilder(checks, tol)
    for path, _ in enumerate_paths(instance):
        stages = [path[: t + 1] for t in range(instance.horizon)]
        total = sum(node_utility(mech, instance, h) for h in stages)
        builder.require(Witness("expost_ir", path, None, total, 0.0))
    if mode is IrMode.STAGEWISE:
        for level in tree_levels(instance)[1:]:
            for history in level:
                utility = node_utility(mech, instance, history)
                builder.require(Witness("stagewise_ir", history, None, utility, 0.0))
    report = builder.build()
    if report.verdicts.get("stagewise_ir") and not report.verdicts["expost_ir"]:
        logger.warning("Stage-wise IR holds but ex-post IR fails within %g", tol)
    return report


def _balance_groups(column: np.ndarray) -> list[float]:
    """One representative per cluster of reachable balances."""
    reps: list[float] = []
    for bal in np.sort(column).tolist():
        if not reps or bal - reps[-1] > GROUP_TOL * max(1.0, abs(bal)):
            reps.append(bal)
    return reps


@dc.dataclass(frozen=True, eq=False)
class _BalanceRow:
    spend: float
    truthful: np.ndarray
    gains: np.ndarray
    charges: np.ndarray
    deposits: np.ndarray


def _evaluate_row(
    policy: StagePolicy, dist: StageDistribution, bal: float
) -> _BalanceRow:
    support = dist.support
    bals = np.full(dist.size, bal)
    spend = float(np.asarray(policy.spend(bals), dtype=float)[0])
    act = policy.act(bals, support)
    gains = support @ np.asarray(act.z, dtype=float).T - act.q[np.newaxis, :]
    return _BalanceRow(spend, np.diag(gains).copy(), gains, act.q, act.d)


def _check_row(
    row: _BalanceRow, bal: float, where: tuple[int, int], builder: ReportBuilder
) -> None:
    size = row.truthful.shape[0]
    builder.require(Witness("bam_spend", where, None, bal, row.spend))
    builder.require(Witness("bam_spend", where, None, row.spend, 0.0))
    for i in range(size):
        truthful = float(row.truthful[i])
        builder.require(Witness("bam_ir", where, (i,), truthful, row.deposits[i]))
        builder.require(Witness("bam_deposit", where, (i,), row.deposits[i], 0.0))
        builder.require(Witness("bam_charge", where, (i,), row.charges[i], 0.0))
        for j in range(size):
            if j != i:
                gain = float(row.gains[i, j])
                builder.require(Witness("bam_ic", where, (i, j), truthful, gain))


def check_bam_conditions(
    bam: BankAccountMechanism, instance: Instance, tol: float = 1e-9
) -> VerificationReport:
    """Sufficient IC and IR conditions of a BAM over its reachable balances.

    At every reachable balance the stage must be single-shot IC and deposit
    no more than the truthful stage utility. Across balances of one stage
    the spend difference must equal the difference in expected truthful
    stage utility. Witness histories are ``(stage, balance row)``.
    """
    instance.require_discrete("Checking BAM conditions")
    table = path_table(instance)
    trace = execute(bam, path_values(instance, table.indices))
    builder = ReportBuilder(BAM_CHECKS, tol)
    for t, (policy, dist) in enumerate(zip(bam.policies, instance.stages, strict=True)):
        ref: tuple[float, float] | None = None
        for r, bal in enumerate(_balance_groups(trace.balances[:, t])):
            row = _evaluate_row(policy, dist, bal)
            where = (t + 1, r)
            _check_row(row, bal, where, builder)
            expected = float(dist.probs @ row.truthful)
            if ref is None:
                ref = (row.spend, expected)
                continue
            builder.require_close(
                Witness(
                    "bam_spend_identity",
                    where,
                    (0,),
                    row.spend - ref[0],
                    expected - ref[1],
                )
            )
    return builder.build()


@dc.dataclass(frozen=True, eq=False)
class BruteForceResult:
    """Optimal revenue over randomized IC and ex-post IR mechanisms."""

    revenue: float
    mech: DirectMechanism


class _TreeLayout:
    """Column offsets of ``x``, ``p`` and ``W`` for every non-root node."""

    def __init__(self, instance: Instance) -> None:
        self.levels = tree_levels(instance)
        self.items = [stage.items for stage in instance.stages]
        self.offsets: dict[History, int] = {}
        size = 0
        for t, level in enumerate(self.levels[1:]):
            for history in level:
                self.offsets[history] = size
                size += self.items[t] + 2
        self.size = size

    def x(self, history: History) -> np.ndarray:
        start = self.offsets[history]
        return np.arange(start, start + self.items[len(history) - 1])

    def p(self, history: History) -> int:
        return self.offsets[history] + self.items[len(history) - 1]

    def w(self, history: History) -> int:
        return self.p(history) + 1


class _SparseRows:
    """COO accumulator of constraint rows."""

    def __init__(self) -> None:
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.data: list[float] = []
        self.count = 0

    def add(self, cols: cabc.Iterable[int], data: cabc.Iterable[float]) -> None:
        cols, data = list(cols), list(data)
        self.rows.extend([self.count] * len(cols))
        self.cols.extend(cols)
        self.data.extend(data)
        self.count += 1

    def matrix(self, width: int) -> sparse.csr_array:
        return sparse.csr_array(
            (self.data, (self.rows, self.cols)), shape=(self.count, width)
        )


def _utility_rows(instance: Instance, layout: _TreeLayout) -> _SparseRows:
    """``W_h − x_h·v + p_h − Σ_c Pr_c W_c = 0`` at every node."""
    rows = _SparseRows()
    horizon = instance.horizon
    for t, level in enumerate(layout.levels[1:], start=1):
        for history in level:
            values = instance.values_at(history)
            cols = [layout.w(history), *layout.x(history).tolist(), layout.p(history)]
            data = [1.0, *(-values).tolist(), 1.0]
            if t < horizon:
                probs = instance.stages[t].probs.tolist()
                cols += [layout.w(history + (c,)) for c in range(len(probs))]
                data += [-prob for prob in probs]
            rows.add(cols, data)
    return rows


def _incentive_rows(instance: Instance, layout: _TreeLayout) -> _SparseRows:
    """IC rows ``W_{h·j} + x_{h·j}·(v_i − v_j) − W_{h·i} ≤ 0`` and IR rows per path."""
    rows = _SparseRows()
    for t, level in enumerate(layout.levels[:-1]):
        support = instance.stages[t].support
        for history in level:
            for i in range(support.shape[0]):
                for j in range(support.shape[0]):
                    if i == j:
                        continue
                    lie, truth = history + (j,), history + (i,)
                    rows.add(
                        [layout.w(lie), *layout.x(lie).tolist(), layout.w(truth)],
                        [1.0, *(support[i] - support[j]).tolist(), -1.0],
                    )
    for path, _ in enumerate_paths(instance):
        cols: list[int] = []
        data: list[float] = []
        for t in range(1, instance.horizon + 1):
            node = path[:t]
            cols += [*layout.x(node).tolist(), layout.p(node)]
            data += [*(-instance.values_at(node)).tolist(), 1.0]
        rows.add(cols, data)
    return rows


def bruteforce_opt(instance: Instance, node_cap: int | None = None) -> BruteForceResult:
    """Solve the revenue LP over every node of the history tree.

    Variables are the allocation ``x``, payment ``p`` and conditional
    continuation utility ``W`` of each node; constraints are stage-wise IC,
    ex-post IR along every path and ``0 ≤ x ≤ 1``.
    """
    instance.require_discrete("The brute-force LP")
    cap = resolve_node_cap(node_cap)
    nodes = instance.node_count
    if nodes > cap:
        msg = f"History tree has {nodes} nodes; the brute-force cap is {cap}."
        raise InstanceTooLargeError(msg)
    layout = _TreeLayout(instance)
    objective = np.zeros(layout.size)
    bounds: list[tuple[float | None, float | None]] = [(None, None)] * layout.size
    for history in layout.offsets:
        objective[layout.p(history)] = history_probability(instance, history)
        for col in layout.x(history).tolist():
            bounds[col] = (0.0, 1.0)
    equal = _utility_rows(instance, layout)
    upper = _incentive_rows(instance, layout)
    result = solve_lp(
        LinearProgram(
            objective=objective,
            a_ub=upper.matrix(layout.size),
            b_ub=np.zeros(upper.count),
            a_eq=equal.matrix(layout.size),
            b_eq=np.zeros(equal.count),
            bounds=bounds,
        )
    )
    logger.info(
        "Brute-force LP over %d nodes: revenue %.10g (gap %.2g)",
        nodes,
        result.objective_value,
        result.duality_gap,
    )
    table = {
        history: StageOutcome(
            np.clip(result.values[layout.x(history)], 0.0, 1.0),
            float(result.values[layout.p(history)]),
        )
        for history in layout.offsets
    }
    return BruteForceResult(result.objective_value, DirectMechanism(table))


@dc.dataclass(frozen=True, eq=False)
class DeviationStrategy:
    """Reports keyed by the buyer's true type history up to the current stage.

    Histories missing from ``reports`` report truthfully.
    """

    reports: cabc.Mapping[History, int] = dc.field(default_factory=dict)

    def __post_init__(self) -> None:
        """Freeze the report table."""
        object.__setattr__(self, "reports", types.MappingProxyType(dict(self.reports)))

    @classmethod
    def truthful(cls) -> DeviationStrategy:
        """Report every type as it is."""
        return cls({})

    def report(self, true_history: History) -> int:
        """Index reported at the last stage of ``true_history``."""
        return self.reports.get(true_history, true_history[-1])


def evaluate_deviation(
    mech: DirectMechanism, instance: Instance, strategy: DeviationStrategy
) -> float:
    """Exact expected buyer utility when reporting according to ``strategy``."""
    mech.require_complete(instance)
    for true_history, index in strategy.reports.items():
        instance.validate_history(true_history)
        if not true_history:
            msg = "Deviation reports need a non-empty history."
            raise BadHistoryError(msg)
        instance.validate_history(true_history[:-1] + (index,))
    total = 0.0
    for path, prob in enumerate_paths(instance):
        reported: History = ()
        utility = 0.0
        for t in range(1, instance.horizon + 1):
            truth = path[:t]
            reported += (strategy.report(truth),)
            utility += mech.outcome(reported).utility(instance.values_at(truth))
        total += prob * utility
    return total


@dc.dataclass(frozen=True)
class _Plan:
    utility: float
    reports: tuple[tuple[History, int], ...] = ()


@dc.dataclass(frozen=True, eq=False)
class DeviationSearch:
    """Best reporting strategy found within the deviation budget."""

    utility: float
    strategy: DeviationStrategy
    truthful_utility: float

    @property
    def gain(self) -> float:
        """Utility gained over truthful reporting."""
        return self.utility - self.truthful_utility


class _Searcher:
    """Memoized search over (true history, reported history, budget)."""

    def __init__(self, mech: DirectMechanism, instance: Instance) -> None:
        self.mech = mech
        self.instance = instance
        self._memo: dict[tuple[History, History, int], _Plan] = {}

    def value(self, true_history: History, reported: History, budget: int) -> _Plan:
        key = (true_history, reported, budget)
        if key in self._memo:
            return self._memo[key]
        t = len(true_history)
        plan = _Plan(0.0)
        if t < self.instance.horizon:
            utility = 0.0
            reports: list[tuple[History, int]] = []
            for i, prob in enumerate(self.instance.stages[t].probs.tolist()):
                best = self._best_report(true_history + (i,), reported, budget)
                utility += prob * best.utility
                reports.extend(best.reports)
            plan = _Plan(utility, tuple(reports))
        self._memo[key] = plan
        return plan

    def _best_report(self, truth: History, reported: History, budget: int) -> _Plan:
        i = truth[-1]
        values = self.instance.values_at(truth)
        size = self.instance.stages[len(truth) - 1].size
        candidates = [i, *(j for j in range(size) if j != i and budget > 0)]
        best: _Plan | None = None
        for j in candidates:
            rest = self.value(truth, reported + (j,), budget - (j != i))
            stage = self.mech.outcome(reported + (j,)).utility(values)
            utility = stage + rest.utility
            if best is None or utility > best.utility + SEARCH_TOL:
                moves = rest.reports if j == i else ((truth, j), *rest.reports)
                best = _Plan(utility, moves)
        if best is None:
            msg = f"Stage {len(truth)} has no support points."
            raise BadHistoryError(msg)
        return best


def best_response(
    mech: DirectMechanism, instance: Instance, max_deviations: int = 2
) -> DeviationSearch:
    """Exhaustive best reply misreporting at most ``max_deviations`` stages."""
    if max_deviations < 0:
        msg = f"max_deviations must be non-negative; got {max_deviations}."
        raise InvalidParameterError(msg)
    nodes = instance.node_count
    if nodes > MAX_SEARCH_NODES:
        msg = f"Deviation search is limited to {MAX_SEARCH_NODES} nodes; got {nodes}."
        raise InstanceTooLargeError(msg)
    mech.require_complete(instance)
    searcher = _Searcher(mech, instance)
    plan = searcher.value((), (), max_deviations)
    truthful = searcher.value((), (), 0).utility
    strategy = DeviationStrategy(dict(plan.reports))
    return DeviationSearch(plan.utility, strategy, truthful)


@dc.dataclass(frozen=True)
class MonteCarloResult:
    """Sample means of revenue and utility with the revenue standard error."""

    revenue_mean: float
    utility_mean: float
    stderr: float
    samples: int


@dc.dataclass(frozen=True)
class _Moments:
    count: int
    mean: float
    m2: float
    utility_mean: float

    def merged(self, other: _Moments) -> _Moments:
        """Pairwise combination of running means and squared deviations."""
        count = self.count + other.count
        delta = other.mean - self.mean
        share = other.count / count
        return _Moments(
            count,
            self.mean + delta * share,
            self.m2 + other.m2 + delta**2 * self.count * other.count / count,
            self.utility_mean + (other.utility_mean - self.utility_mean) * share,
        )


def monte_carlo(
    bam: BankAccountMechanism,
    instance: Instance,
    samples: int,
    seed: int,
    workers: int = 1,
) -> MonteCarloResult:
    """Estimate revenue and utility from ``samples`` seeded type paths.

    Paths are drawn in fixed blocks keyed by ``(seed, block)`` and combined
    in block order, so results do not depend on ``workers``.
    """
    if samples < 1:
        msg = f"samples must be at least 1; got {samples}."
        raise InvalidParameterError(msg)

    def _block(block: int) -> _Moments:
        rows = min(SAMPLE_BLOCK, samples - block * SAMPLE_BLOCK)
        values = [v[:rows] for v in sample_block(instance, seed, block)]
        trace = execute(bam, values)
        revenue = trace.revenue
        mean = float(revenue.mean())
        return _Moments(
            rows,
            mean,
            float(((revenue - mean) ** 2).sum()),
            float(trace.utility.mean()),
        )

    blocks = range(math.ceil(samples / SAMPLE_BLOCK))
    with cf.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        parts = list(pool.map(_block, blocks))
    total = parts[0]
    for part in parts[1:]:
        total = total.merged(part)
    stderr = (
        math.sqrt(total.m2 / (total.count - 1) / total.count)
        if total.count > 1
        else math.nan
    )
    logger.debug("Monte Carlo over %d paths: revenue %.6f", samples, total.mean)
    return MonteCarloResult(total.mean, total.utility_mean, stderr, samples)


__all__ = [
    "BAM_CHECKS",
    "DEFAULT_TOL",
    "STRICT_TOL",
    "BruteForceResult",
    "DeviationSearch",
    "DeviationStrategy",
    "IrMode",
    "MonteCarloResult",
    "best_response",
    "bruteforce_opt",
    "check_bam_conditions",
    "check_ic",
    "check_ir",
    "evaluate_deviation",
    "monte_carlo",
]
