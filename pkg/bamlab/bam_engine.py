"""Bank account mechanisms.

A BAM keeps one non-negative balance. At each stage it spends part of the
balance, runs a per-stage mechanism that may depend on the balance, and
deposits part of the buyer's stage utility. Policies are vectorized over
batches of type paths so exact tree evaluation and Monte Carlo share one
execution loop.
"""

from __future__ import annotations

import dataclasses as dc
import itertools
import logging
import types
import typing as typ

import numpy as np

from bamlab.errors import (
    CoreBamInvalidError,
    IncompleteMechanismError,
    InvalidParameterError,
    NegativeDepositError,
    NotExPostIRError,
    NotSymmetricOrNotICError,
    SpendExceedsBalanceError,
    UnreachableBalanceError,
)
from bamlab.model import (
    DirectMechanism,
    StageOutcome,
    conditional_utilities,
    enumerate_paths,
    expected_continuation,
    node_utility,
    path_table,
    path_values,
    tree_levels,
)
from bamlab.report import ReportBuilder, VerificationReport, Witness
from bamlab.stage_mechs import SALE_TOL, bundle_prices

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.model import History, Instance, StageDistribution
    from bamlab.stage_mechs import StageMechanism

logger = logging.getLogger(__name__)

GROUP_TOL = 1e-9
BALANCE_TOL = 1e-12
CORE_CHECKS = ("subgradient", "consistency", "symmetry", "monotonicity")


@dc.dataclass(frozen=True, eq=False)
class StageAct:
    """Allocation ``z``, charge ``q`` and deposit ``d`` for a batch of buyers."""

    z: np.ndarray
    q: np.ndarray
    d: np.ndarray


class StagePolicy(typ.Protocol):
    """Balance-dependent behaviour of one BAM stage."""

    @property
    def items(self) -> int:
        """Items sold at the stage."""
        ...

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Amount taken from each balance before the stage runs."""
        ...

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Stage outcome and deposit given pre-spend balances and valuations."""
        ...


@dc.dataclass(frozen=True)
class NullPolicy:
    """Do nothing: no spend, no sale, no deposit."""

    items: int

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Spend nothing."""
        return np.zeros_like(bal)

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Allocate nothing."""
        n = values.shape[0]
        return StageAct(np.zeros((n, self.items)), np.zeros(n), np.zeros(n))


@dc.dataclass(frozen=True)
class MixWeights:
    """Weights on the stage mechanism, give-for-free and the bundle price."""

    stage: float
    free: float
    bundle: float

    def __post_init__(self) -> None:
        """Require a probability vector."""
        weights = (self.stage, self.free, self.bundle)
        if min(weights) < 0 or abs(sum(weights) - 1.0) > 1e-12:
            msg = f"Mixture weights must be non-negative and sum to 1; got {weights}."
            raise InvalidParameterError(msg)


@dc.dataclass(frozen=True, eq=False)
class BlendPolicy:
    """Mixture of a stage mechanism, give-for-free and a spend-funded bundle price.

    The spend is ``min(bal, cap)`` with ``cap = w_bundle · Val`` unless
    overridden; the bundle is priced for utility ``spend / w_bundle`` so the
    bundle component returns exactly the spent amount to the buyer. Deposits
    are the give-for-free share of the bundle value.
    """

    dist: StageDistribution
    weights: MixWeights
    stage_mech: StageMechanism | None = None
    spend_cap: float | None = None

    def __post_init__(self) -> None:
        """A positive stage weight needs a stage mechanism."""
        if self.weights.stage > 0 and self.stage_mech is None:
            msg = "A positive stage-mechanism weight needs a stage mechanism."
            raise InvalidParameterError(msg)

    @property
    def items(self) -> int:
        """Items of the stage."""
        return self.dist.items

    @property
    def cap(self) -> float:
        """Largest amount the stage may spend."""
        if self.spend_cap is not None:
            return self.spend_cap
        return self.weights.bundle * self.dist.val

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Spend the balance up to :attr:`cap`."""
        return np.minimum(bal, self.cap)

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Mix the three stage components."""
        w = self.weights
        n = values.shape[0]
        z = np.full((n, self.items), w.free)
        q = np.zeros(n)
        if w.stage > 0 and self.stage_mech is not None:
            alloc, pay = self.stage_mech.outcome(values)
            z += w.stage * alloc
            q += w.stage * pay
        if w.bundle > 0:
            prices = bundle_prices(self.dist, self.spend(bal) / w.bundle)
            sold = values.sum(axis=1) >= prices - SALE_TOL * np.maximum(1.0, prices)
            z += w.bundle * sold[:, np.newaxis]
            q += w.bundle * np.where(sold, prices, 0.0)
        return StageAct(z, q, w.free * values.sum(axis=1))


@dc.dataclass(frozen=True, eq=False)
class SpendOraclePolicy:
    """Deposit the whole bundle value and spend ``min(bal, Val)``."""

    dist: StageDistribution

    @property
    def items(self) -> int:
        """Items of the stage."""
        return self.dist.items

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Spend up to the expected stage value."""
        return np.minimum(bal, self.dist.val)

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Give the items away and bank their full value."""
        n = values.shape[0]
        return StageAct(np.ones((n, self.items)), np.zeros(n), values.sum(axis=1))


@dc.dataclass(frozen=True, eq=False)
class DepositUtilityPolicy:
    """Run a stage mechanism and bank all of the buyer's stage utility."""

    stage_mech: StageMechanism

    @property
    def items(self) -> int:
        """Items of the stage."""
        return self.stage_mech.items

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Spend nothing."""
        return np.zeros_like(bal)

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Deposit ``x·v − p``."""
        alloc, pay = self.stage_mech.outcome(values)
        return StageAct(alloc, pay, (alloc * values).sum(axis=1) - pay)


@dc.dataclass(frozen=True, eq=False)
class TabularPolicy:
    """Policy tabulated over a finite set of reachable balances."""

    dist: StageDistribution
    balances: np.ndarray
    spends: np.ndarray
    z: np.ndarray
    q: np.ndarray
    d: np.ndarray

    @property
    def items(self) -> int:
        """Items of the stage."""
        return self.dist.items

    def rows(self, bal: np.ndarray) -> np.ndarray:
        """Index of the tabulated balance matching each entry of ``bal``."""
        table = self.balances
        top = table.shape[0] - 1
        idx = np.searchsorted(table, bal)
        lo, hi = np.clip(idx - 1, 0, top), np.clip(idx, 0, top)
        pick = np.where(np.abs(table[hi] - bal) <= np.abs(table[lo] - bal), hi, lo)
        miss = np.abs(table[pick] - bal) > GROUP_TOL * np.maximum(1.0, np.abs(bal))
        if miss.any():
            msg = f"Balance {bal[int(np.flatnonzero(miss)[0])]} is not tabulated."
            raise UnreachableBalanceError(msg)
        return pick

    def spend(self, bal: np.ndarray) -> np.ndarray:
        """Tabulated spend."""
        return self.spends[self.rows(bal)]

    def act(self, bal: np.ndarray, values: np.ndarray) -> StageAct:
        """Tabulated outcome for the realized support point."""
        rows = self.rows(bal)
        cols = self.dist.support_index(values)
        return StageAct(self.z[rows, cols], self.q[rows, cols], self.d[rows, cols])


@dc.dataclass(frozen=True, eq=False)
class BankAccountMechanism:
    """One stage policy per stage; the balance starts at zero."""

    policies: tuple[StagePolicy, ...]
    name: str = "bam"

    @property
    def horizon(self) -> int:
        """Number of stages."""
        return len(self.policies)


@dc.dataclass(frozen=True, eq=False)
class BamTrace:
    """Per-path account trace of a batch execution.

    ``balances[:, t]`` is the balance entering stage ``t + 1``; the last
    column is the closing balance.
    """

    balances: np.ndarray
    spends: np.ndarray
    charges: np.ndarray
    deposits: np.ndarray
    allocations: tuple[np.ndarray, ...]
    gross: np.ndarray

    @property
    def payments(self) -> np.ndarray:
        """Stage payments ``s + q`` collected by the seller."""
        return self.spends + self.charges

    @property
    def revenue(self) -> np.ndarray:
        """Total payment of every path."""
        return self.payments.sum(axis=1)

    @property
    def utility(self) -> np.ndarray:
        """Total buyer utility of every path."""
        return (self.gross - self.payments).sum(axis=1)


@dc.dataclass(frozen=True)
class BamRun:
    """Execution of a BAM along one type path."""

    outcomes: tuple[StageOutcome, ...]
    balances: tuple[float, ...]
    spends: tuple[float, ...]
    deposits: tuple[float, ...]


@dc.dataclass(frozen=True)
class BamTotals:
    """Exact expectations of a BAM over a discrete instance."""

    revenue: float
    utility: float
    welfare: float
    spend: float


@dc.dataclass(frozen=True, eq=False)
class BamNodeRecord:
    """Account state and outcome of a BAM at one history node."""

    bal: float
    z: np.ndarray
    q: float
    d: float
    s: float


def execute(bam: BankAccountMechanism, values: cabc.Sequence[np.ndarray]) -> BamTrace:
    """Run ``bam`` on a batch of type paths given as per-stage ``(n, k_t)`` arrays."""
    if len(values) != bam.horizon:
        msg = f"Expected {bam.horizon} stages of valuations; got {len(values)}."
        raise InvalidParameterError(msg)
    n, horizon = values[0].shape[0], bam.horizon
    balances = np.zeros((n, horizon + 1))
    spends, charges, deposits, gross = (np.zeros((n, horizon)) for _ in range(4))
    allocations = []
    for t, (policy, stage_values) in enumerate(zip(bam.policies, values, strict=True)):
        bal = balances[:, t]
        spend = np.asarray(policy.spend(bal), dtype=float)
        _check_spend(t, bal, spend)
        act = policy.act(bal, stage_values)
        if (act.d < -BALANCE_TOL).any():
            row = int(np.argmin(act.d))
            msg = f"Stage {t + 1} deposits {act.d[row]} on path {row}."
            raise NegativeDepositError(msg)
        spends[:, t], charges[:, t], deposits[:, t] = spend, act.q, act.d
        gross[:, t] = (act.z * stage_values).sum(axis=1)
        allocations.append(act.z)
        balances[:, t + 1] = bal - spend + act.d
    return BamTrace(balances, spends, charges, deposits, tuple(allocations), gross)


def _check_spend(t: int, bal: np.ndarray, spend: np.ndarray) -> None:
    over = spend > bal + BALANCE_TOL * np.maximum(1.0, bal)
    if over.any():
        row = int(np.flatnonzero(over)[0])
        msg = f"Stage {t + 1} spends {spend[row]} from a balance of {bal[row]}."
        raise SpendExceedsBalanceError(msg)


def run_bam(bam: BankAccountMechanism, path: cabc.Sequence[np.ndarray]) -> BamRun:
    """Execute ``bam`` along a single path of valuation vectors."""
    trace = execute(bam, [np.atleast_2d(np.asarray(v, dtype=float)) for v in path])
    outcomes = tuple(
        StageOutcome(trace.allocations[t][0], float(trace.payments[0, t]))
        for t in range(bam.horizon)
    )
    return BamRun(
        outcomes,
        tuple(trace.balances[0].tolist()),
        tuple(trace.spends[0].tolist()),
        tuple(trace.deposits[0].tolist()),
    )


def _full_trace(
    bam: BankAccountMechanism, instance: Instance
) -> tuple[np.ndarray, np.ndarray, BamTrace]:
    table = path_table(instance)
    trace = execute(bam, path_values(instance, table.indices))
    return table.indices, table.probs, trace


def induce_direct(bam: BankAccountMechanism, instance: Instance) -> DirectMechanism:
    """Tabulate the direct mechanism ``x_t = z_t``, ``p_t = s_t + q_t``."""
    indices, _, trace = _full_trace(bam, instance)
    payments = trace.payments
    nodes: dict[History, StageOutcome] = {}
    for row, path in enumerate(indices.tolist()):
        for t in range(bam.horizon):
            history = tuple(path[: t + 1])
            if history not in nodes:
                nodes[history] = StageOutcome(
                    trace.allocations[t][row], float(payments[row, t])
                )
    return DirectMechanism(nodes)


def tabulate_bam(
    bam: BankAccountMechanism, instance: Instance
) -> dict[History, BamNodeRecord]:
    """Account state and outcome at every node of the history tree."""
    indices, _, trace = _full_trace(bam, instance)
    records: dict[History, BamNodeRecord] = {}
    for row, path in enumerate(indices.tolist()):
        for t in range(bam.horizon):
            history = tuple(path[: t + 1])
            records.setdefault(
                history,
                BamNodeRecord(
                    float(trace.balances[row, t]),
                    trace.allocations[t][row],
                    float(trace.charges[row, t]),
                    float(trace.deposits[row, t]),
                    float(trace.spends[row, t]),
                ),
            )
    return records


def exact_totals(bam: BankAccountMechanism, instance: Instance) -> BamTotals:
    """Exact expected revenue, utility, welfare and spend over the type tree."""
    _, probs, trace = _full_trace(bam, instance)
    return BamTotals(
        float(probs @ trace.revenue),
        float(probs @ trace.utility),
        float(probs @ trace.gross.sum(axis=1)),
        float(probs @ trace.spends.sum(axis=1)),
    )


@dc.dataclass(frozen=True, eq=False)
class CoreBamSpec:
    """Conditional-utility function ``g`` and allocation ``y`` over the tree."""

    g: cabc.Mapping[History, float]
    y: cabc.Mapping[History, np.ndarray]

    def __post_init__(self) -> None:
        """Freeze both tables."""
        object.__setattr__(self, "g", types.MappingProxyType(dict(self.g)))
        object.__setattr__(self, "y", types.MappingProxyType(dict(self.y)))

    def g_at(self, history: History) -> float:
        """Conditional utility at ``history``."""
        try:
            return float(self.g[history])
        except KeyError:
            msg = f"Core specification has no utility for history {history}."
            raise IncompleteMechanismError(msg) from None

    def y_at(self, history: History) -> np.ndarray:
        """Allocation at ``history``."""
        try:
            return np.asarray(self.y[history], dtype=float)
        except KeyError:
            msg = f"Core specification has no allocation for history {history}."
            raise IncompleteMechanismError(msg) from None


def group_by_value(
    keys: cabc.Iterable[History],
    values: cabc.Mapping[History, float],
    tol: float = GROUP_TOL,
) -> list[list[History]]:
    """Cluster histories whose values lie within ``tol`` of their group's first.

    Groups open at the smallest remaining value, so no group spans more
    than ``tol``.
    """
    groups: list[list[History]] = []
    first = 0.0
    for key in sorted(keys, key=lambda h: (values[h], h)):
        value = values[key]
        if groups and value - first <= tol:
            groups[-1].append(key)
        else:
            groups.append([key])
            first = value
    return [sorted(group) for group in groups]


def _suffixes(instance: Instance, depth: int) -> list[History]:
    """All continuations of a length-``depth`` history, shortest first."""
    sizes = [stage.size for stage in instance.stages[depth:]]
    return [
        suffix
        for length in range(1, len(sizes) + 1)
        for suffix in itertools.product(*(range(m) for m in sizes[:length]))
    ]


def validate_core(
    spec: CoreBamSpec, instance: Instance, tol: float = GROUP_TOL
) -> VerificationReport:
    """Check subgradient, consistency, symmetry and monotonicity of ``(g, y)``."""
    levels = tree_levels(instance)
    builder = ReportBuilder(CORE_CHECKS, tol)
    for t, stage in enumerate(instance.stages):
        for history in levels[t]:
            _check_convexity(spec, stage, history, builder)
    _check_consistency(spec, instance, levels, builder)
    for t in range(1, instance.horizon):
        _check_symmetry(spec, levels[t], _suffixes(instance, t), builder)
    return builder.build()


def _check_convexity(
    spec: CoreBamSpec,
    stage: StageDistribution,
    history: History,
    builder: ReportBuilder,
) -> None:
    support = stage.support
    g = np.array([spec.g_at(history + (i,)) for i in range(stage.size)])
    y = np.array([spec.y_at(history + (i,)) for i in range(stage.size)])
    for i in range(stage.size):
        node = history + (i,)
        builder.require(Witness("subgradient", node, None, float(y[i].min()), 0.0))
        builder.require(Witness("subgradient", node, None, 1.0, float(y[i].max())))
        for j in range(stage.size):
            if j == i:
                continue
            step = float(y[i] @ (support[j] - support[i]))
            builder.require(Witness("subgradient", node, (j,), g[j] - g[i], step))
            if (support[j] >= support[i]).all():
                builder.require(
                    Witness("monotonicity", history + (j,), (i,), g[j], g[i])
                )
    if stage.items == 1:
        order = np.argsort(support[:, 0], kind="stable")
        for lo, hi in itertools.pairwise(order.tolist()):
            builder.require(
                Witness("subgradient", history + (hi,), (lo,), y[hi, 0], y[lo, 0])
            )


def _check_consistency(
    spec: CoreBamSpec,
    instance: Instance,
    levels: list[list[History]],
    builder: ReportBuilder,
) -> None:
    for t, stage in enumerate(instance.stages):
        ref: tuple[History, float] | None = None
        for history in levels[t]:
            children = [spec.g_at(history + (i,)) for i in range(stage.size)]
            gap = spec.g_at(history) - float(stage.probs @ np.array(children))
            if ref is None:
                ref = (history, gap)
                continue
            builder.require_close(
                Witness("consistency", history, ref[0], gap, ref[1])
            )


def _check_symmetry(
    spec: CoreBamSpec,
    level: list[History],
    suffixes: list[History],
    builder: ReportBuilder,
) -> None:
    for group in group_by_value(level, {h: spec.g_at(h) for h in level}):
        ref = group[0]
        for history in group[1:]:
            for suffix in suffixes:
                node, twin = history + suffix, ref + suffix
                lhs = spec.g_at(node) - spec.g_at(history)
                rhs = spec.g_at(twin) - spec.g_at(ref)
                builder.require_close(Witness("symmetry", node, twin, lhs, rhs))
                drift = float(np.abs(spec.y_at(node) - spec.y_at(twin)).max())
                builder.require_close(Witness("symmetry", node, twin, drift, 0.0))


def construct_core_bam(
    spec: CoreBamSpec, instance: Instance
) -> BankAccountMechanism:
    """Build the core BAM of a valid ``(g, y)`` specification."""
    report = validate_core(spec, instance)
    if not report.passed:
        msg = f"Core specification fails: {', '.join(report.failed)}."
        raise CoreBamInvalidError(msg, report.failed)
    return _assemble_core(spec, instance)


def _assemble_core(spec: CoreBamSpec, instance: Instance) -> BankAccountMechanism:
    levels = tree_levels(instance)
    horizon = instance.horizon
    floors = [spec.g_at(())]
    floors += [min(spec.g_at(h) for h in levels[t]) for t in range(1, horizon)]
    floors.append(min(0.0, min(spec.g_at(h) for h in levels[horizon])))
    policies = []
    for t, stage in enumerate(instance.stages):
        bal = {h: spec.g_at(h) - floors[t] for h in levels[t]}
        reps = [group[0] for group in group_by_value(levels[t], bal)]
        rows = [_core_row(spec, stage, h, bal[h] + floors[t + 1]) for h in reps]
        policies.append(
            TabularPolicy(
                stage,
                np.array([bal[h] for h in reps]),
                np.array([row[0] for row in rows]),
                np.stack([row[1] for row in rows]),
                np.stack([row[2] for row in rows]),
                np.stack([row[3] for row in rows]),
            )
        )
    rows = [len(p.balances) for p in policies]
    logger.debug("Core BAM built with %s balance rows", rows)
    return BankAccountMechanism(tuple(policies), name="core")


def _core_row(
    spec: CoreBamSpec, stage: StageDistribution, history: History, offset: float
) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    """Spend, allocation, charge and deposit at a node.

    ``offset`` is the node balance plus the next floor, so the spend leaves
    ``min_j g(h·j) − floor`` in the account before the deposit.
    """
    children = np.array([spec.g_at(history + (i,)) for i in range(stage.size)])
    low = float(children.min())
    u_hat = children - low
    z = np.stack([spec.y_at(history + (i,)) for i in range(stage.size)])
    charge = (z * stage.support).sum(axis=1) - u_hat
    return offset - low, z, charge, u_hat


def shift_to_stagewise_ir(
    mech: DirectMechanism, instance: Instance, tol: float = GROUP_TOL
) -> DirectMechanism:
    """Charge full value before the last stage and settle the rest at the end."""
    mech.require_complete(instance)
    horizon = instance.horizon
    nodes: dict[History, StageOutcome] = {}
    for path, _ in enumerate_paths(instance):
        prefixes = [path[: t + 1] for t in range(horizon)]
        total = sum(node_utility(mech, instance, h) for h in prefixes)
        if total < -tol:
            msg = f"Path {path} leaves the buyer with utility {total}."
            raise NotExPostIRError(msg, path)
        paid = 0.0
        for history in prefixes[:-1]:
            out = mech.outcome(history)
            value = float(out.allocation @ instance.values_at(history))
            nodes.setdefault(history, StageOutcome(out.allocation, value))
            paid += value
        owed = sum(mech.pay(h) for h in prefixes)
        nodes[path] = StageOutcome(mech.alloc(path), owed - paid)
    return DirectMechanism(nodes)


def _is_normalized(mech: DirectMechanism, instance: Instance, tol: float) -> bool:
    return all(
        abs(node_utility(mech, instance, h)) <= tol
        for level in tree_levels(instance)[1:-1]
        for h in level
    )


def symmetrize(
    mech: DirectMechanism, instance: Instance, tol: float = GROUP_TOL
) -> DirectMechanism:
    """Graft the highest-revenue continuation onto every equal-utility history."""
    mech.require_complete(instance)
    if not _is_normalized(mech, instance, tol):
        logger.debug("Shifting payments before symmetrizing")
        mech = shift_to_stagewise_ir(mech, instance, tol)
    levels = tree_levels(instance)
    nodes = dict(mech.nodes)
    for t in range(1, instance.horizon):
        current = DirectMechanism(nodes)
        utilities = conditional_utilities(current, instance)
        revenue = expected_continuation(instance, current.pay)
        suffixes = _suffixes(instance, t)
        for group in group_by_value(levels[t], utilities, tol):
            if len(group) < 2:  # noqa: PLR2004
                continue
            rep = _representative(group, revenue)
            for history in group:
                if history != rep:
                    nodes.update({history + s: nodes[rep + s] for s in suffixes})
    return DirectMechanism(nodes)


def _representative(
    group: list[History], revenue: cabc.Mapping[History, float]
) -> History:
    best = max(revenue[h] for h in group)
    slack = 1e-12 * max(1.0, abs(best))
    return min(h for h in group if revenue[h] >= best - slack)


def core_spec_from_mechanism(
    mech: DirectMechanism, instance: Instance
) -> CoreBamSpec:
    """``g`` as conditional utilities and ``y`` as allocations of ``mech``."""
    g = conditional_utilities(mech, instance)
    y = {h: mech.alloc(h) for level in tree_levels(instance)[1:] for h in level}
    return CoreBamSpec(g, y)


def core_bam_from_symmetric(
    mech: DirectMechanism, instance: Instance
) -> BankAccountMechanism:
    """Core BAM with the same utility and revenue as a symmetric IC-IR mechanism."""
    spec = core_spec_from_mechanism(mech, instance)
    report = validate_core(spec, instance)
    if not report.passed:
        failed = ", ".join(report.failed)
        msg = f"Mechanism is not symmetric and stage-wise IC: {failed}."
        raise NotSymmetricOrNotICError(msg, report.failed)
    return _assemble_core(spec, instance)


def reduce_to_core_bam(
    mech: DirectMechanism, instance: Instance
) -> BankAccountMechanism:
    """Shift payments, symmetrize, then build the core BAM."""
    shifted = shift_to_stagewise_ir(mech, instance)
    return core_bam_from_symmetric(symmetrize(shifted, instance), instance)


__all__ = [
    "BALANCE_TOL",
    "GROUP_TOL",
    "BamNodeRecord",
    "BamRun",
    "BamTotals",
    "BamTrace",
    "BankAccountMechanism",
    "BlendPolicy",
    "CoreBamSpec",
    "DepositUtilityPolicy",
    "MixWeights",
    "NullPolicy",
    "SpendOraclePolicy",
    "StageAct",
    "StagePolicy",
    "TabularPolicy",
    "construct_core_bam",
    "core_bam_from_symmetric",
    "core_spec_from_mechanism",
    "exact_totals",
    "execute",
    "group_by_value",
    "induce_direct",
    "reduce_to_core_bam",
    "run_bam",
    "shift_to_stagewise_ir",
    "symmetrize",
    "tabulate_bam",
    "validate_core",
]
