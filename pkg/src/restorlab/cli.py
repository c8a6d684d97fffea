"""``lab <scenario> --config <path> --out <dir> --seed <u64>``"""

import argparse
import sys

from .config import SCENARIOS, ConfigError, load_config, parse_config
from .scenarios import REPORT_NAME, run_scenario


def build_parser():
    p = argparse.ArgumentParser(prog="lab", description="Run a toy restoration scenario.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--config", help="JSON file overriding preset settings")
    p.add_argument("--out", default="lab-out", help="output directory (default: lab-out)")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config, name=args.scenario, out_dir=args.out, seed=args.seed)
        else:
            cfg = parse_config("{}", name=args.scenario, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"lab: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lab: cannot read config: {exc}", file=sys.stderr)
        return 1
    try:
        report = run_scenario(cfg)
    except OSError as exc:
        print(f"lab: I/O error: {exc}", file=sys.stderr)
        return 1
    failed = [name for name, ok in report["checks"].items() if not ok]
    print(f"{args.scenario}: wrote {args.out}/{REPORT_NAME}; "
          f"{len(report['checks']) - len(failed)}/{len(report['checks'])} checks passed")
    for name in failed:
        print(f"  failed: {name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
