"""Single-stage building blocks.

A stage mechanism maps a batch of valuation vectors to allocations and
payments. The bank account engine mixes these blocks; the history-independent
composition of one block per stage is the benchmark ``M^SM``.
"""

from __future__ import annotations

import dataclasses as dc
import logging
import math
import typing as typ

import numpy as np
from scipy import integrate

from bamlab.errors import (
    InvalidParameterError,
    ThetaOutOfRangeError,
    UseProvidedStageMechanismError,
)
from bamlab.model import (
    DirectMechanism,
    EqualRevenue,
    StageOutcome,
    tree_levels,
)
from bamlab.report import ReportBuilder, VerificationReport, Witness

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.model import Instance, StageDistribution

logger = logging.getLogger(__name__)

SALE_TOL = 1e-12
THETA_TOL = 1e-12


class StageMechanism(typ.Protocol):
    """Vectorized single-stage mechanism."""

    items: int

    def outcome(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return allocations ``(n, items)`` and payments ``(n,)``."""
        ...


@dc.dataclass(frozen=True)
class PostedBundlePrice:
    """Sell every item as one bundle at ``price``; a posted price when k = 1."""

    items: int
    price: float

    def outcome(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Allocate the bundle to every row whose bundle value reaches the price."""
        sold = values.sum(axis=1) >= self.price - SALE_TOL * max(1.0, self.price)
        alloc = np.repeat(sold[:, np.newaxis], self.items, axis=1).astype(float)
        return alloc, np.where(sold, self.price, 0.0)


@dc.dataclass(frozen=True)
class GiveForFree:
    """Allocate everything at price zero."""

    items: int

    def outcome(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full allocation, zero payment."""
        n = values.shape[0]
        return np.ones((n, self.items)), np.zeros(n)


@dc.dataclass(frozen=True, eq=False)
class TabularStageMechanism:
    """Stage mechanism given row by row over a discrete support."""

    dist: StageDistribution
    alloc: np.ndarray
    pay: np.ndarray

    @property
    def items(self) -> int:
        """Items of the underlying stage."""
        return self.dist.items

    def outcome(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Look each valuation up in the support table."""
        rows = self.dist.support_index(values)
        return self.alloc[rows], self.pay[rows]


@dc.dataclass(frozen=True)
class GrandBundlePrice:
    """Bundle price ``r`` calibrated so expected buyer utility equals ``theta``."""

    theta: float
    price: float


@dc.dataclass(frozen=True)
class StageTotals:
    """Expected revenue and buyer utility of one stage mechanism."""

    revenue: float
    utility: float


def give_for_free(dist: StageDistribution) -> GiveForFree:
    """Give every item away."""
    return GiveForFree(dist.items)


def myerson_stage(dist: StageDistribution) -> PostedBundlePrice:
    """Revenue-optimal posted price among support points, lowest price on ties.

    Equal-revenue stages earn 1 at every price in ``[1, v_max]``; the lowest,
    1, is returned.
    """
    if dist.items > 1:
        msg = (
            f"No optimal mechanism is known for a {dist.items}-item stage; "
            "supply an approximate stage mechanism instead."
        )
        raise UseProvidedStageMechanismError(msg)
    if isinstance(dist.kind, EqualRevenue):
        return PostedBundlePrice(1, 1.0)
    values = dist.support[:, 0]
    revenues = np.array([v * dist.probs[values >= v].sum() for v in values])
    best = revenues.max()
    ties = values[revenues >= best - 1e-12 * max(1.0, best)]
    return PostedBundlePrice(1, float(ties.min()))


def _utility_curve(dist: StageDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints ``r`` (ascending) and ``E[(1·v − r)^+]`` at each."""
    bundles = dist.bundle_values
    prices = np.unique(np.concatenate([[0.0], bundles]))
    surplus = np.maximum(bundles[np.newaxis, :] - prices[:, np.newaxis], 0.0)
    return prices, surplus @ dist.probs


def bundle_prices(dist: StageDistribution, thetas: np.ndarray) -> np.ndarray:
    """Vectorized inverse of ``r ↦ E[(1·v − r)^+]``; largest ``r`` when flat."""
    thetas = np.asarray(thetas, dtype=float)
    val = dist.val
    slack = THETA_TOL * max(1.0, val)
    if (thetas < -slack).any() or (thetas > val + slack).any():
        bad = thetas[(thetas < -slack) | (thetas > val + slack)][0]
        msg = f"Target utility {bad} lies outside [0, {val}]."
        raise ThetaOutOfRangeError(msg)
    thetas = np.clip(thetas, 0.0, val)
    if isinstance(dist.kind, EqualRevenue):
        log_cap = math.log(dist.kind.v_max)
        return np.where(
            thetas <= log_cap,
            dist.kind.v_max * np.exp(-thetas),
            1.0 + log_cap - thetas,
        )
    prices, utilities = _utility_curve(dist)
    # Utilities fall as prices rise; the first hit of each utility in the
    # reversed order carries the largest price.
    rev_util, rev_price = utilities[::-1], prices[::-1]
    levels, first = np.unique(rev_util, return_index=True)
    return np.interp(thetas, levels, rev_price[first])


def bundle_price_for_utility(
    dist: StageDistribution, theta: float
) -> GrandBundlePrice:
    """Price the grand bundle so the buyer expects utility ``theta``."""
    price = float(bundle_prices(dist, np.array([theta]))[0])
    return GrandBundlePrice(float(theta), price)


def grand_bundle_mech(dist: StageDistribution, theta: float) -> PostedBundlePrice:
    """Posted-price-for-the-grand-bundle mechanism with parameter ``theta``."""
    return PostedBundlePrice(dist.items, bundle_price_for_utility(dist, theta).price)


def stage_totals(mech: StageMechanism, dist: StageDistribution) -> StageTotals:
    """Expected revenue and utility; exact on supports, quadrature otherwise."""
    if isinstance(dist.kind, EqualRevenue):
        return _equal_revenue_totals(mech, dist.kind.v_max)
    support = dist.support
    alloc, pay = mech.outcome(support)
    utility = (alloc * support).sum(axis=1) - pay
    return StageTotals(float(dist.probs @ pay), float(dist.probs @ utility))


def _equal_revenue_totals(mech: StageMechanism, v_max: float) -> StageTotals:
    def _pay(v: float) -> float:
        return float(mech.outcome(np.array([[v]]))[1][0])

    def _utility(v: float) -> float:
        alloc, pay = mech.outcome(np.array([[v]]))
        return float(alloc[0, 0] * v - pay[0])

    kinks = None
    if isinstance(mech, PostedBundlePrice) and 1.0 < mech.price < v_max:
        kinks = [mech.price]
    totals = []
    for func in (_pay, _utility):
        body, _ = integrate.quad(
            lambda v, f=func: f(v) / v**2, 1.0, v_max, points=kinks, limit=200
        )
        totals.append(body + func(v_max) / v_max)
    return StageTotals(totals[0], totals[1])


def check_stage_mechanism(
    mech: StageMechanism, dist: StageDistribution, tol: float = 1e-9
) -> VerificationReport:
    """Exhaustive single-shot IC and IR check over a discrete support."""
    builder = ReportBuilder(("single_shot_ic", "single_shot_ir"), tol)
    support = dist.support
    alloc, pay = mech.outcome(support)
    # gain[i, j]: utility of type i when reporting type j.
    gain = support @ alloc.T - pay[np.newaxis, :]
    truthful = np.diag(gain)
    for i in range(dist.size):
        builder.require(
            Witness("single_shot_ir", (i,), None, float(truthful[i]), 0.0)
        )
        j = int(gain[i].argmax())
        best = float(gain[i, j])
        builder.require(Witness("single_shot_ic", (i,), (j,), float(truthful[i]), best))
    return builder.build()


def compose_stage_mechanisms(
    instance: Instance, mechs: cabc.Sequence[StageMechanism]
) -> DirectMechanism:
    """History-independent direct mechanism running ``mechs[t]`` at stage t."""
    if len(mechs) != instance.horizon:
        msg = f"Expected {instance.horizon} stage mechanisms; got {len(mechs)}."
        raise InvalidParameterError(msg)
    tables = []
    for mech, stage in zip(mechs, instance.stages, strict=True):
        tables.append(mech.outcome(stage.support))
    nodes = {}
    for level in tree_levels(instance)[1:]:
        for history in level:
            alloc, pay = tables[len(history) - 1]
            nodes[history] = StageOutcome(alloc[history[-1]], float(pay[history[-1]]))
    return DirectMechanism(nodes)


def default_msm(instance: Instance) -> list[StageMechanism]:
    """Per-stage optimal posted prices; multi-item stages must be supplied."""
    return [myerson_stage(stage) for stage in instance.stages]


__all__ = [
    "GiveForFree",
    "GrandBundlePrice",
    "PostedBundlePrice",
    "StageMechanism",
    "StageTotals",
    "TabularStageMechanism",
    "bundle_price_for_utility",
    "bundle_prices",
    "check_stage_mechanism",
    "compose_stage_mechanisms",
    "default_msm",
    "give_for_free",
    "grand_bundle_mech",
    "myerson_stage",
    "stage_totals",
]
