"""Command line entry point: ``reddiff run | sweep | check``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from .config import ConfigError
from .runner import OUTPUT_ENV, SWEEP_PARAMS, run_config_file, sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="reddiff", description="Variational posterior sampling with analytic diffusion priors.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None, help="override sampler.seed")
    run.add_argument("--out", default=None, help=f"output directory (env {OUTPUT_ENV} takes precedence)")

    sw = sub.add_parser("sweep", help="rerun a config over values of one parameter")
    sw.add_argument("--config", required=True)
    sw.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sw.add_argument("--values", required=True, help="comma-separated list")
    sw.add_argument("--out", default=None)
    sw.add_argument("--workers", type=int, default=1)

    sub.add_parser("check", help="run the built-in verification suite")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            out = os.environ.get(OUTPUT_ENV) or args.out
            summary = run_config_file(args.config, out, args.seed)
            print(f"final_loss={summary['final_loss']:.6g} psnr={summary['vs_truth']['psnr_db']}")
            return 0
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            out = os.environ.get(OUTPUT_ENV) or args.out
            root = sweep(args.config, args.param, values, out, args.workers)
            print(root / "sweep.csv")
            return 0
        from .checks import run_checks

        results = run_checks()
        failed = [r.name for r in results if not r.passed]
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        return 1 if failed else 0
    except (ConfigError, ValueError, OSError) as exc:
        print(f"reddiff: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
