"""Command line entry point: ``shockline <experiment> --config FILE``."""

import argparse
import logging
import os
import sys

from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run
from .report import emit_report

log = logging.getLogger("shockline")


def build_parser():
    p = argparse.ArgumentParser(prog="shockline",
                                description="TASEP shock simulations and reference laws")
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", required=True, help="key = value file")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="output directory (default: config 'out')")
    p.add_argument("--trials", type=int, help="overrides the config trial count")
    p.add_argument("--threads", type=int, help="worker threads for trial chunks")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config, dict(seed=args.seed, out=args.out,
                                            trials=args.trials, threads=args.threads))
    except (ConfigError, OSError) as e:
        print(f"shockline: {e}", file=sys.stderr)
        return 2
    if cfg.experiment != args.experiment:
        print(f"shockline: config is for {cfg.experiment!r}, not {args.experiment!r}",
              file=sys.stderr)
        return 2
    try:
        report = run(cfg)
    except ConfigError as e:
        print(f"shockline: {e}", file=sys.stderr)
        return 2
    paths = emit_report(report, cfg.out)
    for name, ok in report.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(f"{report.experiment}: {'PASS' if report.verdict else 'FAIL'} "
          f"({report.runtime:.1f}s) -> {os.path.join(cfg.out, 'report.json')}")
    log.info("tables: %s", paths["tables"])
    return 0 if report.verdict else 1


if __name__ == "__main__":
    sys.exit(main())
