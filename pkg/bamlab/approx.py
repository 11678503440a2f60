"""Approximation mechanisms, the spend oracle and the revenue upper bound."""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses as dc
import logging
import math
import typing as typ

from scipy import integrate

from bamlab.bam_engine import (
    BankAccountMechanism,
    BlendPolicy,
    DepositUtilityPolicy,
    MixWeights,
    NullPolicy,
    SpendOraclePolicy,
    exact_totals,
)
from bamlab.errors import InvalidParameterError, SigmaEnumerationTooLargeError
from bamlab.model import Instance, StageDistribution
from bamlab.stage_mechs import PostedBundlePrice, default_msm, stage_totals

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.stage_mechs import StageMechanism

logger = logging.getLogger(__name__)

MAX_SIGMA_HORIZON = 20


@dc.dataclass(frozen=True)
class SigmaString:
    """Per-stage choice between give-for-free (0) and spend-and-price (1)."""

    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        """Accept only binary strings."""
        if any(bit not in (0, 1) for bit in self.bits):
            msg = f"Sigma strings hold only 0 and 1; got {self.bits}."
            raise InvalidParameterError(msg)

    @classmethod
    def from_int(cls, code: int, horizon: int) -> SigmaString:
        """Bit ``t`` of ``code`` (least significant first) drives stage ``t + 1``."""
        return cls(tuple((code >> t) & 1 for t in range(horizon)))

    @property
    def code(self) -> int:
        """Inverse of :meth:`from_int`."""
        return sum(bit << t for t, bit in enumerate(self.bits))

    def flip_prefix(self, stage: int) -> SigmaString:
        """Flip the bits of every stage before ``stage`` (1-based)."""
        return SigmaString(
            tuple(1 - b if t < stage - 1 else b for t, b in enumerate(self.bits))
        )

    def __str__(self) -> str:
        """Render as a bit string, stage 1 first."""
        return "".join(str(b) for b in self.bits)


@dc.dataclass(frozen=True)
class UpperBound:
    """Revenue of the history-independent benchmark plus the largest spend."""

    msm_revenue: float
    expected_spend_star: float

    @property
    def total(self) -> float:
        """Upper bound on the revenue of every dynamic mechanism."""
        return self.msm_revenue + self.expected_spend_star


@dc.dataclass(frozen=True, eq=False)
class DeterministicChoice:
    """Winner of the deterministic family together with its exact revenue."""

    mechanism: BankAccountMechanism
    revenue: float
    sigma: SigmaString | None
    guarantee: float = 0.0


def _stage_mechs(
    instance: Instance, msm: cabc.Sequence[StageMechanism] | None
) -> list[StageMechanism]:
    mechs = default_msm(instance) if msm is None else list(msm)
    if len(mechs) != instance.horizon:
        msg = f"Expected {instance.horizon} stage mechanisms; got {len(mechs)}."
        raise InvalidParameterError(msg)
    return mechs


def b_star(instance: Instance) -> BankAccountMechanism:
    """Give everything away, bank full value and spend ``min(bal, Val)``."""
    return BankAccountMechanism(
        tuple(SpendOraclePolicy(stage) for stage in instance.stages), name="b_star"
    )


def msm_bam(
    instance: Instance, msm: cabc.Sequence[StageMechanism] | None = None
) -> BankAccountMechanism:
    """History-independent composition written as a BAM with an idle account."""
    weights = MixWeights(1.0, 0.0, 0.0)
    policies = tuple(
        BlendPolicy(stage, weights, stage_mech=mech)
        for stage, mech in zip(
            instance.stages, _stage_mechs(instance, msm), strict=True
        )
    )
    return BankAccountMechanism(policies, name="msm")


def msm_revenue(
    instance: Instance, msm: cabc.Sequence[StageMechanism] | None = None
) -> float:
    """Sum of per-stage expected revenues."""
    mechs = _stage_mechs(instance, msm)
    return sum(
        stage_totals(mech, stage).revenue
        for mech, stage in zip(mechs, instance.stages, strict=True)
    )


def revenue_upper_bound(
    instance: Instance, msm: cabc.Sequence[StageMechanism] | None = None
) -> UpperBound:
    """``Rev(M^SM) + E[Σ s*]``, exact over the discrete type tree."""
    instance.require_discrete("The revenue upper bound")
    spend = exact_totals(b_star(instance), instance).spend
    bound = UpperBound(msm_revenue(instance, msm), spend)
    logger.debug("Upper bound %.6f (benchmark %.6f)", bound.total, bound.msm_revenue)
    return bound


def corollary_alpha(
    instance: Instance,
    approx_msm: cabc.Sequence[StageMechanism] | None,
    alpha: float,
) -> BankAccountMechanism:
    """Mix an α-approximate stage mechanism, give-for-free and the bundle price.

    Weights are ``1/(2α+1)``, ``α/(2α+1)`` and ``α/(2α+1)``; the bundle is
    priced for utility ``(2 + 1/α)·s``.
    """
    if not 0.0 < alpha <= 1.0:
        msg = f"alpha must lie in (0, 1]; got {alpha}."
        raise InvalidParameterError(msg)
    scale = 2.0 * alpha + 1.0
    weights = MixWeights(1.0 / scale, alpha / scale, 1.0 - (1.0 + alpha) / scale)
    policies = tuple(
        BlendPolicy(stage, weights, stage_mech=mech)
        for stage, mech in zip(
            instance.stages, _stage_mechs(instance, approx_msm), strict=True
        )
    )
    return BankAccountMechanism(policies, name=f"alpha_mix[{alpha:g}]")


def three_approx(
    instance: Instance, msm: cabc.Sequence[StageMechanism] | None = None
) -> BankAccountMechanism:
    """Equal thirds of the benchmark, give-for-free and the bundle price."""
    bam = corollary_alpha(instance, msm, 1.0)
    return dc.replace(bam, name="three_approx")


def sigma_bam(instance: Instance, sigma: SigmaString) -> BankAccountMechanism:
    """Deterministic BAM choosing give-for-free or spend-and-price per stage."""
    if len(sigma.bits) != instance.horizon:
        msg = f"Sigma has {len(sigma.bits)} bits for {instance.horizon} stages."
        raise InvalidParameterError(msg)
    free, bundle = MixWeights(0.0, 1.0, 0.0), MixWeights(0.0, 0.0, 1.0)
    policies = tuple(
        BlendPolicy(stage, bundle if bit else free)
        for stage, bit in zip(instance.stages, sigma.bits, strict=True)
    )
    return BankAccountMechanism(policies, name=f"sigma[{sigma}]")


def half_mix_bam(instance: Instance) -> BankAccountMechanism:
    """Give-for-free and spend-and-price mixed evenly at every stage."""
    weights = MixWeights(0.0, 0.5, 0.5)
    policies = tuple(BlendPolicy(stage, weights) for stage in instance.stages)
    return BankAccountMechanism(policies, name="half_mix")


def best_deterministic(
    instance: Instance,
    det_msm: cabc.Sequence[StageMechanism] | None = None,
    alpha: float = 1.0,
    workers: int = 1,
) -> DeterministicChoice:
    """Best of the deterministic benchmark and all ``2^T`` sigma BAMs.

    ``det_msm`` must earn at least ``alpha`` times the benchmark revenue; the
    winner then earns ``α/(4α+1)`` of the optimum, recorded as ``guarantee``.
    Ties keep the benchmark, then the sigma string with the smallest code.
    """
    if not 0.0 < alpha <= 1.0:
        msg = f"alpha must lie in (0, 1]; got {alpha}."
        raise InvalidParameterError(msg)
    horizon = instance.horizon
    if horizon > MAX_SIGMA_HORIZON:
        msg = (
            f"Enumerating 2^{horizon} sigma strings exceeds "
            f"the 2^{MAX_SIGMA_HORIZON} cap."
        )
        raise SigmaEnumerationTooLargeError(msg)
    benchmark = msm_bam(instance, det_msm)
    best = DeterministicChoice(
        benchmark, exact_totals(benchmark, instance).revenue, None
    )

    def _evaluate(code: int) -> DeterministicChoice:
        sigma = SigmaString.from_int(code, horizon)
        bam = sigma_bam(instance, sigma)
        return DeterministicChoice(bam, exact_totals(bam, instance).revenue, sigma)

    with cf.ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        for choice in pool.map(_evaluate, range(2**horizon)):
            if choice.revenue > best.revenue:
                best = choice
    logger.info(
        "Best deterministic mechanism %s earns %.6f", best.mechanism.name, best.revenue
    )
    return dc.replace(best, guarantee=alpha / (4.0 * alpha + 1.0))


def gap_instance(v_max: float, zero_stages: int = 0) -> Instance:
    """Two equal-revenue stages separated by ``zero_stages`` worthless stages."""
    if zero_stages < 0:
        msg = f"zero_stages must be non-negative; got {zero_stages}."
        raise InvalidParameterError(msg)
    equal = StageDistribution.equal_revenue(v_max)
    zero = StageDistribution.discrete([0.0], [1.0])
    return Instance((equal, *(zero,) * zero_stages, equal))


def example1_bam(v_max: float, zero_stages: int = 0) -> BankAccountMechanism:
    """Price 1 and bank the surplus, then spend up to ``ln v_max`` on the last item."""
    instance = gap_instance(v_max, zero_stages)
    last = instance.stages[-1]
    policies = (
        DepositUtilityPolicy(PostedBundlePrice(1, 1.0)),
        *(NullPolicy(1) for _ in range(zero_stages)),
        BlendPolicy(last, MixWeights(0.0, 0.0, 1.0), spend_cap=math.log(v_max)),
    )
    return BankAccountMechanism(policies, name="example1")


def example1_revenue(v_max: float) -> float:
    """Expected revenue of :func:`example1_bam` by quadrature."""
    if not v_max > 1.0:
        msg = f"v_max must exceed 1; got {v_max}."
        raise InvalidParameterError(msg)
    cap = math.log(v_max)
    kink = 1.0 + cap
    body, _ = integrate.quad(
        lambda v: min(v - 1.0, cap) / v**2,
        1.0,
        v_max,
        points=[kink] if kink < v_max else None,
        limit=200,
    )
    return 2.0 + body + min(v_max - 1.0, cap) / v_max


__all__ = [
    "MAX_SIGMA_HORIZON",
    "DeterministicChoice",
    "SigmaString",
    "UpperBound",
    "b_star",
    "best_deterministic",
    "corollary_alpha",
    "example1_bam",
    "example1_revenue",
    "gap_instance",
    "half_mix_bam",
    "msm_bam",
    "msm_revenue",
    "revenue_upper_bound",
    "sigma_bam",
    "three_approx",
]
