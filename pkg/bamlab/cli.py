"""Command-line entry point.

Every subcommand prints JSON-lines records on stdout and logs on stderr.
Exit codes: 0 on success, 1 when a verification fails and 2 on usage,
file or instance errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import typing as typ
from pathlib import Path

from bamlab.approx import (
    SigmaString,
    b_star,
    best_deterministic,
    corollary_alpha,
    example1_bam,
    example1_revenue,
    gap_instance,
    msm_bam,
    revenue_upper_bound,
    sigma_bam,
    three_approx,
)
from bamlab.bam_engine import exact_totals
from bamlab.config import RunConfig, load_defaults
from bamlab.dp_fptas import backward_dp, extract_mechanism
from bamlab.errors import BamlabError, ConfigError
from bamlab.io import (
    dump_bam,
    dump_mechanism,
    encode_line,
    load_instance,
    load_mechanism,
)
from bamlab.verify import IrMode, bruteforce_opt, check_ic, check_ir, monte_carlo

if typ.TYPE_CHECKING:
    import collections.abc as cabc

    from bamlab.bam_engine import BankAccountMechanism
    from bamlab.model import Instance

    Handler = cabc.Callable[[RunConfig, argparse.Namespace], int]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
APPROX_MECHS = ("three-approx", "best-sigma", "msm", "alpha-mix")
SIMULATE_MECHS = ("three-approx", "msm", "alpha-mix", "b-star")
HISTORY_INDEPENDENT_CAP = 2.0


def _emit(record: cabc.Mapping[str, object]) -> None:
    sys.stdout.buffer.write(encode_line(record))
    sys.stdout.flush()


def _instance(cfg: RunConfig) -> Instance:
    if cfg.instance_path is None:
        msg = f"{cfg.command} needs --instance."
        raise ConfigError(msg)
    return load_instance(cfg.instance_path)


def _write_out(cfg: RunConfig, payload: bytes) -> None:
    if cfg.output_path is not None:
        cfg.output_path.write_bytes(payload)
        logger.info("Wrote %s", cfg.output_path)


def cmd_solve(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Bracket the optimal revenue and extract the mechanism."""
    instance = _instance(cfg)
    policy = backward_dp(instance, cfg.epsilon, workers=cfg.workers)
    mech = extract_mechanism(policy, instance)
    _write_out(cfg, dump_mechanism(mech))
    _emit(
        {
            "command": "solve",
            "epsilon": cfg.epsilon,
            "value_lower": policy.value_lower,
            "value_upper": policy.value_upper,
            "xi_star": policy.xi_star,
            "lp_count": policy.lp_count,
            "breakpoints": list(policy.breakpoint_counts),
        }
    )
    return EXIT_OK


def _approx_mechanism(
    name: str, instance: Instance, cfg: RunConfig
) -> tuple[BankAccountMechanism, dict[str, object]]:
    if name == "best-sigma":
        choice = best_deterministic(instance, alpha=cfg.alpha, workers=cfg.workers)
        sigma = None if choice.sigma is None else str(choice.sigma)
        return choice.mechanism, {"sigma": sigma, "guarantee": choice.guarantee}
    if name == "msm":
        return msm_bam(instance), {}
    if name == "alpha-mix":
        return corollary_alpha(instance, None, cfg.alpha), {"alpha": cfg.alpha}
    return three_approx(instance), {}


def _exact_record(
    bam: BankAccountMechanism, instance: Instance, cfg: RunConfig
) -> dict[str, object]:
    revenue = exact_totals(bam, instance).revenue
    bound = revenue_upper_bound(instance)
    record: dict[str, object] = {
        "exact_revenue": revenue,
        "upper_bound": bound.total,
        "ratio_vs_bound": revenue / bound.total if bound.total > 0 else None,
        "msm_revenue": bound.msm_revenue,
        "expected_spend_star": bound.expected_spend_star,
    }
    if instance.node_count <= cfg.node_cap:
        opt = bruteforce_opt(instance, cfg.node_cap).revenue
        record["opt_revenue"] = opt
        record["ratio_vs_bruteforce"] = revenue / opt if opt > 0 else None
    return record


def cmd_approx(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Build an approximation mechanism and report its revenue."""
    instance = _instance(cfg)
    name = cfg.mech or "three-approx"
    bam, extra = _approx_mechanism(name, instance, cfg)
    if instance.is_discrete:
        record = _exact_record(bam, instance, cfg)
        _write_out(cfg, dump_bam(bam, instance))
    else:
        result = monte_carlo(bam, instance, cfg.samples, cfg.seed, cfg.workers)
        record = {"mc_revenue": result.revenue_mean, "stderr": result.stderr}
    _emit({"command": "approx", "mechanism_name": bam.name, **extra, **record})
    return EXIT_OK


def cmd_check(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Check stage-wise IC and IR of a tabular mechanism file."""
    instance = _instance(cfg)
    if cfg.mechanism_path is None:
        msg = "check needs --mechanism."
        raise ConfigError(msg)
    mech = load_mechanism(cfg.mechanism_path, instance)
    report = check_ic(mech, instance, cfg.tolerance).merged(
        check_ir(mech, instance, IrMode(args.ir), cfg.tolerance)
    )
    _emit({"command": "check", **report.as_record()})
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_bound(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Report the revenue upper bound."""
    bound = revenue_upper_bound(_instance(cfg))
    _emit(
        {
            "command": "bound",
            "msm_revenue": bound.msm_revenue,
            "expected_spend_star": bound.expected_spend_star,
            "total": bound.total,
        }
    )
    return EXIT_OK


def cmd_oracle(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Solve the brute-force revenue LP."""
    result = bruteforce_opt(_instance(cfg), cfg.node_cap)
    _write_out(cfg, dump_mechanism(result.mech))
    _emit({"command": "oracle", "revenue": result.revenue})
    return EXIT_OK


def _simulated_mechanism(
    cfg: RunConfig, instance: Instance, sigma: str | None
) -> BankAccountMechanism:
    if sigma is not None:
        if not sigma or set(sigma) - {"0", "1"}:
            msg = f"--sigma takes a string of 0s and 1s; got {sigma!r}."
            raise ConfigError(msg)
        return sigma_bam(instance, SigmaString(tuple(int(bit) for bit in sigma)))
    name = cfg.mech or "three-approx"
    if name == "b-star":
        return b_star(instance)
    return _approx_mechanism(name, instance, cfg)[0]


def cmd_simulate(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Monte Carlo revenue of a BAM."""
    instance = _instance(cfg)
    bam = _simulated_mechanism(cfg, instance, args.sigma)
    result = monte_carlo(bam, instance, cfg.samples, cfg.seed, cfg.workers)
    _emit(
        {
            "command": "simulate",
            "mechanism": bam.name,
            "samples": result.samples,
            "seed": cfg.seed,
            "revenue_mean": result.revenue_mean,
            "utility_mean": result.utility_mean,
            "stderr": result.stderr,
        }
    )
    return EXIT_OK


def cmd_example1(cfg: RunConfig, args: argparse.Namespace) -> int:
    """Equal-revenue gap example: quadrature, Monte Carlo and the cap of 2."""
    v_max, zero_stages = args.vmax, args.zero_stages
    quadrature = example1_revenue(v_max)
    instance = gap_instance(v_max, zero_stages)
    bam = example1_bam(v_max, zero_stages)
    result = monte_carlo(bam, instance, cfg.samples, cfg.seed, cfg.workers)
    _emit(
        {
            "command": "example1",
            "v_max": v_max,
            "zero_stages": zero_stages,
            "quadrature_revenue": quadrature,
            "closed_form": 2.0 + math.log1p(math.log(v_max)),
            "log_log_estimate": 2.0 + math.log(math.log(v_max)),
            "mc_revenue": result.revenue_mean,
            "mc_stderr": result.stderr,
            "samples": result.samples,
            "history_independent_cap": HISTORY_INDEPENDENT_CAP,
        }
    )
    return EXIT_OK


HANDLERS: dict[str, Handler] = {
    "solve": cmd_solve,
    "approx": cmd_approx,
    "check": cmd_check,
    "bound": cmd_bound,
    "oracle": cmd_oracle,
    "simulate": cmd_simulate,
    "example1": cmd_example1,
}


def _add_instance(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--instance", type=Path, required=True)


def _add_sampling(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--samples", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(prog="bamlab", description=__doc__)
    parser.add_argument("--config", type=Path, help="defaults manifest (TOML)")
    parser.add_argument("--verbose", action="store_true", help="log at DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="optimal mechanism by dynamic programming")
    _add_instance(solve)
    solve.add_argument("--epsilon", type=float)
    solve.add_argument("--workers", type=int)
    solve.add_argument("--out", type=Path)

    approx = sub.add_parser("approx", help="approximation mechanisms")
    _add_instance(approx)
    approx.add_argument("--mech", choices=APPROX_MECHS, default="three-approx")
    approx.add_argument("--alpha", type=float)
    approx.add_argument("--out", type=Path)
    _add_sampling(approx)

    check = sub.add_parser("check", help="verify IC and IR of a mechanism file")
    _add_instance(check)
    check.add_argument("--mechanism", type=Path, required=True)
    check.add_argument("--ir", choices=[m.value for m in IrMode], default="expost")
    check.add_argument("--tol", type=float)

    bound = sub.add_parser("bound", help="revenue upper bound")
    _add_instance(bound)

    oracle = sub.add_parser("oracle", help="brute-force optimal revenue LP")
    _add_instance(oracle)
    oracle.add_argument("--out", type=Path)

    simulate = sub.add_parser("simulate", help="Monte Carlo revenue of a BAM")
    _add_instance(simulate)
    simulate.add_argument("--mech", choices=SIMULATE_MECHS)
    simulate.add_argument("--sigma")
    simulate.add_argument("--alpha", type=float)
    _add_sampling(simulate)

    example = sub.add_parser("example1", help="equal-revenue gap example")
    example.add_argument("--vmax", type=float, required=True)
    example.add_argument("--zero-stages", type=int, default=0)
    _add_sampling(example)
    return parser


_FLAG_FIELDS = {
    "instance": "instance_path",
    "mechanism": "mechanism_path",
    "epsilon": "epsilon",
    "samples": "samples",
    "seed": "seed",
    "alpha": "alpha",
    "out": "output_path",
    "mech": "mech",
    "workers": "workers",
    "tol": "tolerance",
}


def _configure_logging(*, verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: cabc.Sequence[str] | None = None) -> int:
    """Parse ``argv`` and run the chosen subcommand."""
    args = build_parser().parse_args(argv)
    _configure_logging(verbose=args.verbose)
    flags = vars(args)
    overrides = {field: flags.get(flag) for flag, field in _FLAG_FIELDS.items()}
    try:
        cfg = RunConfig.merge(args.command, load_defaults(args.config), overrides)
        return HANDLERS[args.command](cfg, args)
    except (BamlabError, OSError) as exc:
        print(f"bamlab {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


__all__ = [
    "EXIT_FAILED",
    "EXIT_OK",
    "EXIT_USAGE",
    "build_parser",
    "cmd_approx",
    "cmd_bound",
    "cmd_check",
    "cmd_example1",
    "cmd_oracle",
    "cmd_simulate",
    "cmd_solve",
    "main",
]


if __name__ == "__main__":
    raise SystemExit(main())
