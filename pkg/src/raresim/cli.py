"""Command-line entry point.

``raresim run --config FILE`` executes one experiment described by a
config file; ``raresim table4 --out DIR`` runs the built-in three-method
cantilever comparison.  The RARESIM_LOG environment variable (off, info,
trace) controls logging; trace additionally dumps per-stage particle and
learning CSV files.
"""

import argparse
import logging
import os
import sys

from .bench import load_config, run_experiment, run_reference_comparison
from .errors import ExperimentError, RareSimError


def _setup_logging():
    level_name = os.environ.get("RARESIM_LOG", "off").lower()
    levels = {"off": logging.WARNING, "info": logging.INFO, "trace": logging.DEBUG}
    if level_name not in levels:
        print(f"warning: unknown RARESIM_LOG value {level_name!r}, using 'off'",
              file=sys.stderr)
        level_name = "off"
    logging.basicConfig(level=levels[level_name],
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="raresim",
        description="Rare-event failure probability estimation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="run an experiment from a config file")
    run_parser.add_argument("--config", required=True, help="config file path")
    run_parser.add_argument("--seed", type=int, default=None,
                            help="override the master seed")
    run_parser.add_argument("--jobs", type=int, default=None,
                            help="worker processes (default: available cores)")
    run_parser.add_argument("--out", default="raresim_results",
                            help="output directory (default: raresim_results)")

    table_parser = sub.add_parser(
        "table4", help="run the built-in cantilever comparison benchmark")
    table_parser.add_argument("--out", required=True, help="output directory")
    table_parser.add_argument("--jobs", type=int, default=None,
                              help="worker processes (default: available cores)")
    table_parser.add_argument("--seed", type=int, default=20260808,
                              help="master seed for the comparison")
    return parser


def main(argv=None):
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = load_config(args.config, overrides={"seed": args.seed})
            stats = run_experiment(config, args.out, jobs=args.jobs)
            print(f"method={config.method} problem={config.problem} "
                  f"runs={stats.n_runs} failures={stats.failures}")
            print(f"mean={stats.mean:.6g}"
                  + (f" sd={stats.sd:.6g}" if stats.sd is not None else "")
                  + (f" kappa={stats.kappa:.4g}" if stats.kappa is not None else "")
                  + (f" cov={stats.cov:.4g}" if stats.cov is not None else ""))
            print(f"artifacts written to {args.out}")
        else:
            jobs = args.jobs if args.jobs is not None else (os.cpu_count() or 1)
            rows = run_reference_comparison(args.out, jobs=jobs, seed=args.seed)
            header = f"{'method':8s} {'m':>9s} {'N?':>12s} {'estimate':>12s} " \
                     f"{'delta':>10s} {'kappa':>8s} {'cov':>8s}"
            print(header.replace("N?", "N(mean)"))
            for row in rows:
                print(f"{row['method']:8s} {row['m']:>9d} {row['N_mean']:>12.1f} "
                      f"{row['estimate_mean']:>12.5g} {row['delta']:>10.3g} "
                      f"{row['kappa']:>8.3g} {row['cov']:>8.3g}")
            print(f"artifacts written to {args.out}")
    except ExperimentError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except RareSimError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
