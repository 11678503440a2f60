"""Instances, histories, outcomes and exact expectations over type trees.

Histories are tuples of support indices, one per realized stage. Every exact
routine walks the discrete history tree level by level; equal-revenue stages
are only reachable through sampling.
"""

from __future__ import annotations

import dataclasses as dc
import functools
import itertools
import logging
import math
import types
import typing as typ

import numpy as np

from bamlab.errors import (
    BadHistoryError,
    IncompleteMechanismError,
    InvalidDistributionError,
    InvalidParameterError,
    UnsupportedContinuousError,
)

if typ.TYPE_CHECKING:
    import collections.abc as cabc

logger = logging.getLogger(__name__)

PROB_TOL = 1e-12
ALLOC_TOL = 1e-9
SAMPLE_BLOCK = 4096

History = tuple[int, ...]
ValuationPath = tuple[np.ndarray, ...]


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dc.dataclass(frozen=True, eq=False)
class Discrete:
    """Finite support of valuation vectors with explicit probabilities."""

    support: np.ndarray
    probs: np.ndarray


@dc.dataclass(frozen=True)
class EqualRevenue:
    """Equal-revenue law on ``[1, v_max]`` with an atom ``1/v_max`` at the top."""

    v_max: float


@dc.dataclass(frozen=True, eq=False)
class StageDistribution:
    """Type distribution of a single stage.

    Attributes
    ----------
    kind
        Either a :class:`Discrete` support or an :class:`EqualRevenue` law.
    items
        Number of items sold at this stage.
    """

    kind: Discrete | EqualRevenue
    items: int = 1

    def __post_init__(self) -> None:
        """Reject distributions that break the stage invariants."""
        if self.items < 1:
            msg = f"A stage needs at least one item; got {self.items}."
            raise InvalidDistributionError(msg)
        if isinstance(self.kind, EqualRevenue):
            _validate_equal_revenue(self.kind, self.items)
        else:
            _validate_discrete(self.kind, self.items)

    @classmethod
    def discrete(
        cls,
        support: cabc.Sequence[cabc.Sequence[float]] | cabc.Sequence[float],
        probs: cabc.Sequence[float],
    ) -> StageDistribution:
        """Build a discrete stage; scalar supports describe one-item stages."""
        support_arr = np.array(support, dtype=float)
        if support_arr.ndim == 1:
            support_arr = support_arr[:, np.newaxis]
        if support_arr.ndim != 2 or support_arr.shape[0] == 0:  # noqa: PLR2004
            msg = "Support must be a non-empty list of valuation vectors."
            raise InvalidDistributionError(msg)
        probs_arr = np.array(probs, dtype=float)
        kind = Discrete(_read_only(support_arr), _read_only(probs_arr))
        return cls(kind, items=support_arr.shape[1])

    @classmethod
    def equal_revenue(cls, v_max: float) -> StageDistribution:
        """Build a one-item equal-revenue stage capped at ``v_max``."""
        return cls(EqualRevenue(float(v_max)), items=1)

    @property
    def is_discrete(self) -> bool:
        """Whether the stage has a finite support."""
        return isinstance(self.kind, Discrete)

    @property
    def support(self) -> np.ndarray:
        """Support points as an ``(m, items)`` array."""
        return self._discrete("support").support

    @property
    def probs(self) -> np.ndarray:
        """Probabilities aligned with :attr:`support`."""
        return self._discrete("probabilities").probs

    @property
    def size(self) -> int:
        """Number of support points."""
        return int(self.support.shape[0])

    @property
    def bundle_values(self) -> np.ndarray:
        """Grand-bundle value ``1·v`` of every support point."""
        return self.support.sum(axis=1)

    @functools.cached_property
    def val(self) -> float:
        """Expected total valuation ``E[1·v]``."""
        if isinstance(self.kind, EqualRevenue):
            return 1.0 + math.log(self.kind.v_max)
        return float(self.probs @ self.bundle_values)

    def quantile_index(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on ``[0, 1)`` to support indices."""
        probs = self.probs
        idx = np.searchsorted(np.cumsum(probs), u, side="right")
        last = int(np.flatnonzero(probs > 0)[-1])
        return np.minimum(idx, last)

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on ``[0, 1)`` to valuation vectors of shape ``(n, items)``."""
        if isinstance(self.kind, EqualRevenue):
            v_max = self.kind.v_max
            top = u >= 1.0 - 1.0 / v_max
            safe = np.where(top, 0.0, u)
            values = np.where(top, v_max, 1.0 / (1.0 - safe))
            return values[:, np.newaxis]
        return self.support[self.quantile_index(u)]

    def support_index(self, values: np.ndarray) -> np.ndarray:
        """Locate each row of ``values`` in the support."""
        support = self.support
        close = np.isclose(
            values[:, np.newaxis, :], support[np.newaxis], rtol=0.0, atol=1e-12
        )
        hits = close.all(axis=2)
        found = hits.any(axis=1)
        if not found.all():
            row = values[int(np.flatnonzero(~found)[0])]
            msg = f"Valuation {row.tolist()} is not a support point of this stage."
            raise BadHistoryError(msg)
        return hits.argmax(axis=1)

    def _discrete(self, what: str) -> Discrete:
        if isinstance(self.kind, EqualRevenue):
            msg = f"Equal-revenue stages have no finite {what}."
            raise UnsupportedContinuousError(msg)
        return self.kind


def _validate_equal_revenue(kind: EqualRevenue, items: int) -> None:
    if not math.isfinite(kind.v_max) or kind.v_max <= 1.0:
        msg = f"Equal-revenue stages need a finite v_max > 1; got {kind.v_max}."
        raise InvalidDistributionError(msg)
    if items != 1:
        msg = "Equal-revenue stages carry exactly one item."
        raise InvalidDistributionError(msg)


def _validate_discrete(kind: Discrete, items: int) -> None:
    support, probs = kind.support, kind.probs
    if support.ndim != 2 or support.shape[1] != items:  # noqa: PLR2004
        msg = f"Support must have shape (m, {items}); got {support.shape}."
        raise InvalidDistributionError(msg)
    if probs.shape != (support.shape[0],):
        msg = "Probabilities must align one-to-one with support points."
        raise InvalidDistributionError(msg)
    if not (np.isfinite(support).all() and np.isfinite(probs).all()):
        msg = "Support points and probabilities must be finite."
        raise InvalidDistributionError(msg)
    if (probs < 0).any() or abs(probs.sum() - 1.0) > PROB_TOL:
        msg = f"Probabilities must be non-negative and sum to 1; got {probs.tolist()}."
        raise InvalidDistributionError(msg)
    if (support < 0).any():
        msg = "Valuations must be non-negative."
        raise InvalidDistributionError(msg)
    if np.unique(support, axis=0).shape[0] != support.shape[0]:
        msg = "Support points must be pairwise distinct."
        raise InvalidDistributionError(msg)


@dc.dataclass(frozen=True)
class Instance:
    """An ordered sequence of independent stage distributions."""

    stages: tuple[StageDistribution, ...]

    def __post_init__(self) -> None:
        """Require at least one stage."""
        if not self.stages:
            msg = "An instance needs at least one stage."
            raise InvalidDistributionError(msg)

    @property
    def horizon(self) -> int:
        """Number of stages ``T``."""
        return len(self.stages)

    @property
    def is_discrete(self) -> bool:
        """Whether every stage has a finite support."""
        return all(stage.is_discrete for stage in self.stages)

    @property
    def vals(self) -> np.ndarray:
        """Per-stage expected total valuations."""
        return np.array([stage.val for stage in self.stages])

    @property
    def node_count(self) -> int:
        """Number of non-root nodes in the history tree."""
        self.require_discrete("counting tree nodes")
        sizes = [stage.size for stage in self.stages]
        return sum(math.prod(sizes[:t]) for t in range(1, len(sizes) + 1))

    def require_discrete(self, operation: str) -> None:
        """Raise unless every stage is discrete."""
        if not self.is_discrete:
            msg = f"{operation} needs discrete supports at every stage."
            raise UnsupportedContinuousError(msg)

    def validate_history(self, history: History) -> None:
        """Raise :class:`BadHistoryError` unless ``history`` is a tree prefix."""
        if len(history) > self.horizon:
            msg = f"History {history} is longer than the horizon {self.horizon}."
            raise BadHistoryError(msg)
        for t, index in enumerate(history):
            if not 0 <= index < self.stages[t].size:
                msg = f"History {history} has no point {index} at stage {t + 1}."
                raise BadHistoryError(msg)

    def values_at(self, history: History) -> np.ndarray:
        """Valuation vector realized at the last stage of ``history``."""
        return self.stages[len(history) - 1].support[history[-1]]


@dc.dataclass(frozen=True, eq=False)
class StageOutcome:
    """Allocation vector and payment of one stage."""

    allocation: np.ndarray
    payment: float

    def __post_init__(self) -> None:
        """Clip allocation noise and reject genuinely invalid outcomes."""
        alloc = np.asarray(self.allocation, dtype=float)
        if (alloc < -ALLOC_TOL).any() or (alloc > 1 + ALLOC_TOL).any():
            msg = f"Allocations must lie in [0, 1]; got {alloc.tolist()}."
            raise InvalidParameterError(msg)
        if not math.isfinite(self.payment):
            msg = f"Payments must be finite; got {self.payment}."
            raise InvalidParameterError(msg)
        object.__setattr__(self, "allocation", _read_only(np.clip(alloc, 0.0, 1.0)))
        object.__setattr__(self, "payment", float(self.payment))

    def utility(self, values: np.ndarray) -> float:
        """Quasi-linear buyer utility ``x·v − p``."""
        return float(self.allocation @ values) - self.payment


@dc.dataclass(frozen=True, eq=False)
class DirectMechanism:
    """Tabular direct mechanism over the history tree."""

    nodes: cabc.Mapping[History, StageOutcome]

    def __post_init__(self) -> None:
        """Freeze the node table."""
        object.__setattr__(self, "nodes", types.MappingProxyType(dict(self.nodes)))

    def outcome(self, history: History) -> StageOutcome:
        """Return the stage outcome stored at ``history``."""
        try:
            return self.nodes[history]
        except KeyError:
            msg = f"Mechanism has no outcome for history {history}."
            raise IncompleteMechanismError(msg) from None

    def alloc(self, history: History) -> np.ndarray:
        """Allocation vector at ``history``."""
        return self.outcome(history).allocation

    def pay(self, history: History) -> float:
        """Payment at ``history``."""
        return self.outcome(history).payment

    @property
    def deterministic(self) -> bool:
        """Whether every allocation is integral."""
        return all(
            np.all((out.allocation == 0.0) | (out.allocation == 1.0))
            for out in self.nodes.values()
        )

    def require_complete(self, instance: Instance) -> None:
        """Raise unless every non-root node of ``instance`` has an outcome."""
        for level in tree_levels(instance)[1:]:
            for history in level:
                self.outcome(history)

    def with_updates(
        self, updates: cabc.Mapping[History, StageOutcome]
    ) -> DirectMechanism:
        """Copy the mechanism with some nodes replaced."""
        return DirectMechanism({**self.nodes, **updates})


@dc.dataclass(frozen=True)
class Totals:
    """Expected revenue, buyer utility and welfare of a mechanism."""

    revenue: float
    utility: float
    welfare: float


@dc.dataclass(frozen=True, eq=False)
class PathTable:
    """Every full type path as an index matrix with its probabilities."""

    indices: np.ndarray
    probs: np.ndarray


def tree_levels(instance: Instance) -> list[list[History]]:
    """Histories grouped by length ``0..T`` in lexicographic order."""
    instance.require_discrete("Tree enumeration")
    levels: list[list[History]] = [[()]]
    for stage in instance.stages:
        levels.append([h + (i,) for h in levels[-1] for i in range(stage.size)])
    return levels


def history_probability(instance: Instance, history: History) -> float:
    """Probability that the first ``len(history)`` stages realize ``history``."""
    return math.prod(
        float(instance.stages[t].probs[i]) for t, i in enumerate(history)
    )


def enumerate_paths(instance: Instance) -> cabc.Iterator[tuple[History, float]]:
    """Yield every full type path with its product probability."""
    instance.require_discrete("Path enumeration")
    ranges = [range(stage.size) for stage in instance.stages]
    for path in itertools.product(*ranges):
        yield path, history_probability(instance, path)


def path_table(instance: Instance) -> PathTable:
    """Vectorized form of :func:`enumerate_paths`."""
    instance.require_discrete("Path enumeration")
    ranges = [range(stage.size) for stage in instance.stages]
    indices = np.array(list(itertools.product(*ranges)), dtype=np.intp)
    indices = indices.reshape(-1, instance.horizon)
    probs = np.ones(indices.shape[0])
    for t, stage in enumerate(instance.stages):
        probs = probs * stage.probs[indices[:, t]]
    return PathTable(indices, probs)


def path_values(instance: Instance, indices: np.ndarray) -> list[np.ndarray]:
    """Per-stage valuation arrays of shape ``(n, k_t)`` for index paths."""
    return [stage.support[indices[:, t]] for t, stage in enumerate(instance.stages)]


def expected_continuation(
    instance: Instance, node_value: cabc.Callable[[History], float]
) -> dict[History, float]:
    """Map each history to ``E[Σ_{τ>t} node_value]`` over its sub-tree."""
    levels = tree_levels(instance)
    horizon = instance.horizon
    cont = dict.fromkeys(levels[horizon], 0.0)
    for t in range(horizon - 1, -1, -1):
        probs = instance.stages[t].probs
        for history in levels[t]:
            total = 0.0
            for i, prob in enumerate(probs):
                child = history + (i,)
                total += prob * (node_value(child) + cont[child])
            cont[history] = total
    return cont


def node_utility(mech: DirectMechanism, instance: Instance, history: History) -> float:
    """Truthful stage utility realized at ``history``."""
    return mech.outcome(history).utility(instance.values_at(history))


def continuation_utilities(
    mech: DirectMechanism, instance: Instance
) -> dict[History, float]:
    """Promised utility ``U_t``: expected truthful utility of later stages."""
    return expected_continuation(
        instance, lambda h: node_utility(mech, instance, h)
    )


def conditional_utilities(
    mech: DirectMechanism, instance: Instance
) -> dict[History, float]:
    """``Utl(M | h)`` for every history of length ``0..T``."""
    mech.require_complete(instance)
    cont = continuation_utilities(mech, instance)
    realized: dict[History, float] = {(): 0.0}
    for level in tree_levels(instance)[1:]:
        for history in level:
            realized[history] = realized[history[:-1]] + node_utility(
                mech, instance, history
            )
    return {h: realized[h] + cont[h] for h in cont}


def conditional_utility(
    mech: DirectMechanism, instance: Instance, history: History
) -> float:
    """Realized utility so far plus expected truthful utility of later stages."""
    instance.require_discrete("Conditional utility")
    instance.validate_history(history)
    return conditional_utilities(mech, instance)[history]


def expected_totals(mech: DirectMechanism, instance: Instance) -> Totals:
    """Exact expected revenue, utility and welfare by path enumeration."""
    mech.require_complete(instance)
    revenue = utility = welfare = 0.0
    for path, prob in enumerate_paths(instance):
        for t in range(1, len(path) + 1):
            history = path[:t]
            out = mech.outcome(history)
            gross = float(out.allocation @ instance.values_at(history))
            revenue += prob * out.payment
            utility += prob * (gross - out.payment)
            welfare += prob * gross
    return Totals(revenue, utility, welfare)


def _uniform_block(seed: int, block: int, width: int) -> np.ndarray:
    sequence = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.default_rng(sequence).random((SAMPLE_BLOCK, width))


def sample_block(instance: Instance, seed: int, block: int) -> list[np.ndarray]:
    """Draw block ``block`` of ``SAMPLE_BLOCK`` type paths for ``seed``."""
    uniforms = _uniform_block(seed, block, instance.horizon)
    return [
        stage.quantile(uniforms[:, t]) for t, stage in enumerate(instance.stages)
    ]


def sample_path(instance: Instance, seed: int, index: int) -> ValuationPath:
    """Deterministic type path number ``index`` of the stream keyed by ``seed``."""
    block, row = divmod(index, SAMPLE_BLOCK)
    return tuple(values[row] for values in sample_block(instance, seed, block))


def sample_history(instance: Instance, seed: int, index: int) -> History:
    """Support-index form of :func:`sample_path` for discrete instances."""
    instance.require_discrete("Sampling histories")
    block, row = divmod(index, SAMPLE_BLOCK)
    uniforms = _uniform_block(seed, block, instance.horizon)[row]
    return tuple(
        int(stage.quantile_index(uniforms[t : t + 1])[0])
        for t, stage in enumerate(instance.stages)
    )


def random_instance(seed: int, max_horizon: int = 3, max_size: int = 3) -> Instance:
    """One-item instance with distinct values on a 0.01 grid in ``[0, 10]``.

    Horizon and support sizes are drawn uniformly from ``1..max_horizon`` and
    ``1..max_size``; probabilities are Dirichlet(1) draws.
    """
    rng = np.random.default_rng(seed)
    horizon = int(rng.integers(1, max_horizon + 1))
    stages = []
    for _ in range(horizon):
        size = int(rng.integers(1, max_size + 1))
        values = np.sort(rng.choice(1001, size=size, replace=False)) / 100.0
        probs = rng.dirichlet(np.ones(size))
        probs[-1] = 1.0 - probs[:-1].sum()
        stages.append(StageDistribution.discrete(values.tolist(), probs.tolist()))
    return Instance(tuple(stages))


__all__ = [
    "PROB_TOL",
    "SAMPLE_BLOCK",
    "Discrete",
    "DirectMechanism",
    "EqualRevenue",
    "History",
    "Instance",
    "PathTable",
    "StageDistribution",
    "StageOutcome",
    "Totals",
    "ValuationPath",
    "conditional_utilities",
    "conditional_utility",
    "continuation_utilities",
    "enumerate_paths",
    "expected_continuation",
    "expected_totals",
    "history_probability",
    "node_utility",
    "path_table",
    "path_values",
    "random_instance",
    "sample_block",
    "sample_history",
    "sample_path",
    "tree_levels",
]
