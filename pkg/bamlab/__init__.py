"""Bank account mechanisms for multi-stage revenue maximization."""

from __future__ import annotations

from bamlab.approx import best_deterministic, revenue_upper_bound, three_approx
from bamlab.bam_engine import BankAccountMechanism, exact_totals, reduce_to_core_bam
from bamlab.dp_fptas import backward_dp, extract_mechanism
from bamlab.errors import BamlabError
from bamlab.model import DirectMechanism, Instance, StageDistribution
from bamlab.verify import bruteforce_opt, check_ic, check_ir, monte_carlo

__all__ = [
    "BamlabError",
    "BankAccountMechanism",
    "DirectMechanism",
    "Instance",
    "StageDistribution",
    "backward_dp",
    "best_deterministic",
    "bruteforce_opt",
    "check_ic",
    "check_ir",
    "exact_totals",
    "extract_mechanism",
    "monte_carlo",
    "reduce_to_core_bam",
    "revenue_upper_bound",
    "three_approx",
]
