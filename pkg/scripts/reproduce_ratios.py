#!/usr/bin/env python3
"""Batch entry point regenerating revenue ratios on seeded random instances."""

from __future__ import annotations

import argparse
import sys

from bamlab.approx import best_deterministic, revenue_upper_bound, three_approx
from bamlab.bam_engine import exact_totals
from bamlab.dp_fptas import backward_dp
from bamlab.errors import BamlabError
from bamlab.io import encode_line
from bamlab.model import random_instance
from bamlab.verify import bruteforce_opt


def _ratios(seed: int, epsilon: float) -> dict[str, object]:
    instance = random_instance(seed)
    opt = bruteforce_opt(instance).revenue
    policy = backward_dp(instance, epsilon)
    mixture = exact_totals(three_approx(instance), instance).revenue
    choice = best_deterministic(instance)
    bound = revenue_upper_bound(instance).total
    return {
        "seed": seed,
        "horizon": instance.horizon,
        "opt_revenue": opt,
        "dp_lower": policy.value_lower,
        "dp_upper": policy.value_upper,
        "three_approx_ratio": mixture / opt if opt > 0 else None,
        "best_deterministic_ratio": choice.revenue / opt if opt > 0 else None,
        "bound_ratio": bound / opt if opt > 0 else None,
    }


def main() -> int:
    """Print one JSON record per random instance."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--count", type=int, default=50)
    parser.add_argument("--epsilon", type=float, default=0.05)
    args = parser.parse_args()

    try:
        for seed in range(args.count):
            sys.stdout.buffer.write(encode_line(_ratios(seed, args.epsilon)))
    except BamlabError as exc:
        print(exc, file=sys.stderr)
        return 1

    return 0


if __name__ == "__main__":
    raise SystemExit(main())
