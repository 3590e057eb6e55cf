"""Command line: ``approach run|check|fit``."""

from __future__ import annotations

import argparse
import sys

from .exceptions import ConfigError, InfeasibleError, InvalidArgumentError
from .harness import RunConfig, Trace, check, fit_rate, run, run_replicas, write_replicas

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_UNDETERMINED = 0, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="approach", description="Approachability simulations and checks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a strategy against an adversary and write a CSV trace")
    r.add_argument("--mode", required=True, choices=["full", "partial", "informative", "displacement"])
    r.add_argument("--game")
    r.add_argument("--target", required=True)
    r.add_argument("--horizon", type=int, default=1000)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--grid", type=int, default=5, help="simplex grid density")
    r.add_argument("--eta", type=float, default=0.1, help="exploration probability (partial mode)")
    r.add_argument("--block", type=int, default=100, help="block length (partial mode)")
    r.add_argument("--doubling", action="store_true", help="doubling block schedule (partial mode)")
    r.add_argument("--adversary", default="uniform",
                   help="uniform, best_response, stationary:<index|extreme|w1,w2,...>, replay:<file>")
    r.add_argument("--epsilon", type=float, default=0.01, help="smoothing budget (informative/partial)")
    r.add_argument("--sampled", action="store_true", help="sample pure actions instead of expected payoffs (full)")
    r.add_argument("--replicas", type=int, default=1)
    r.add_argument("--out", help="CSV path; stdout if omitted")

    c = sub.add_parser("check", help="decide approachability, or convexity of a game")
    c.add_argument("--mode", choices=["full", "partial", "informative", "displacement"])
    c.add_argument("--game")
    c.add_argument("--target")
    c.add_argument("--grid", type=int, default=5)
    c.add_argument("--convex-game", action="store_true")
    c.add_argument("--seed", type=int, default=0)

    f = sub.add_parser("fit", help="fit log distance against log stage for a trace")
    f.add_argument("trace")
    f.add_argument("--burn-in", type=int, default=10)
    f.add_argument("--replica", type=int, help="restrict a merged trace to one replica")
    return p


def _run(args) -> int:
    config = RunConfig(
        mode=args.mode, target=args.target, game=args.game, horizon=args.horizon, seed=args.seed,
        grid_density=args.grid, eta=args.eta, block_length=args.block, doubling=args.doubling,
        adversary=args.adversary, epsilon=args.epsilon, sampled=args.sampled, replicas=args.replicas,
    )
    if config.replicas > 1:
        if not args.out:
            raise ConfigError("--replicas > 1 needs --out")
        traces = run_replicas(config)
        write_replicas(traces, args.out)
        return EXIT_OK
    trace = run(config)
    if args.out:
        trace.write(args.out)
    else:
        sys.stdout.write(trace.to_csv())
    return EXIT_OK


def _fit(args) -> int:
    trace = Trace.read(args.trace)
    if args.replica is not None:
        if "replica" not in trace.columns:
            raise ConfigError(f"{args.trace} has no replica column")
        k = trace.columns.index("replica")
        trace = Trace(trace.columns[1:], [r[1:] for r in trace.rows if r[k] == args.replica], trace.metadata)
    elif "replica" in trace.columns:
        raise ConfigError("merged trace: choose one with --replica")
    result = fit_rate(trace, args.burn_in)
    if result.status != "ok":
        print(result.status)
    else:
        print(f"slope {result.slope:.6f}  intercept {result.intercept:.6f}  r2 {result.r2:.6f}  points {result.points}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "fit":
            return _fit(args)
        report = check(args.mode, args.game, args.target, args.grid, args.convex_game, args.seed)
        print(report.text())
        return report.exit_code
    except InfeasibleError as exc:
        print(f"error: infeasible target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
