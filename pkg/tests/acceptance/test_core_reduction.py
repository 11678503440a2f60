"""Any IC, ex-post IR mechanism reduces to a core BAM without losing revenue."""

from __future__ import annotations

import typing as typ

import numpy as np
import pytest

from bamlab.approx import SigmaString, msm_bam, sigma_bam, three_approx
from bamlab.bam_engine import (
    core_spec_from_mechanism,
    exact_totals,
    induce_direct,
    reduce_to_core_bam,
    shift_to_stagewise_ir,
    symmetrize,
    validate_core,
)
from bamlab.model import StageOutcome, expected_totals, tree_levels
from bamlab.verify import check_bam_conditions, check_ic, check_ir
from tests.conftest import build_random_instance

if typ.TYPE_CHECKING:
    from bamlab.model import DirectMechanism, History, Instance

pytestmark = pytest.mark.slow

SEEDS = range(30)


def _source_mechanism(seed: int, instance: Instance) -> DirectMechanism:
    """Alternate between the mixture, a sigma BAM and the benchmark prices."""
    kind = seed % 3
    if kind == 0:
        bam = three_approx(instance)
    elif kind == 1:
        rng = np.random.default_rng(seed)
        code = int(rng.integers(2**instance.horizon))
        bam = sigma_bam(instance, SigmaString.from_int(code, instance.horizon))
    else:
        bam = msm_bam(instance)
    return induce_direct(bam, instance)


def _perturb(mech: DirectMechanism, instance: Instance, seed: int) -> DirectMechanism:
    """Move a random amount of each node's payment onto all of its children.

    The expected continuation and every path total are unchanged, so the
    result stays IC and ex-post IR but is no longer stage-wise IR.
    """
    rng = np.random.default_rng(seed + 1000)
    levels = tree_levels(instance)
    shifts: dict[History, float] = {
        h: float(rng.uniform(-1.0, 1.0)) for level in levels[1:-1] for h in level
    }
    nodes = {}
    for history, out in mech.nodes.items():
        pay = out.payment - shifts.get(history, 0.0) + shifts.get(history[:-1], 0.0)
        nodes[history] = StageOutcome(out.allocation, pay)
    return mech.with_updates(nodes)


@pytest.mark.parametrize("seed", SEEDS)
def test_reduction_preserves_utility_and_revenue(seed: int) -> None:
    """Utility is unchanged, revenue weakly grows and the BAM conditions hold."""
    instance = build_random_instance(seed)
    source = _source_mechanism(seed, instance)
    mech = _perturb(source, instance, seed)
    assert check_ic(mech, instance, tol=1e-9).passed, "perturbation keeps IC"
    assert check_ir(mech, instance, tol=1e-9).passed, "perturbation keeps IR"

    core = reduce_to_core_bam(mech, instance)
    before = expected_totals(mech, instance)
    after = exact_totals(core, instance)
    assert after.utility == pytest.approx(before.utility, abs=1e-9), (
        "buyer utility is preserved"
    )
    assert after.revenue >= before.revenue - 1e-9, "revenue never decreases"

    spec = core_spec_from_mechanism(
        symmetrize(shift_to_stagewise_ir(mech, instance), instance), instance
    )
    assert validate_core(spec, instance).passed, "core conditions hold"
    report = check_bam_conditions(core, instance, tol=1e-7)
    assert report.passed, f"BAM conditions fail: {report.failed}"
    if source.deterministic:
        assert induce_direct(core, instance).deterministic, (
            "deterministic inputs give deterministic BAMs"
        )
