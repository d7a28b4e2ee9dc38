"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ALL_SCHEMES, ConfigError, ScenarioConfig, dump_config, load_config
from .experiments import (
    SWEEP_AXES,
    NumericalFailure,
    rate_region,
    region_csv,
    report_json,
    run_scenario,
    sweep,
    sweep_csv,
    write_report,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("uavicic")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _scheme_list(text: str) -> list[str]:
    names = [s.strip() for s in text.split(",") if s.strip()]
    if names == ["all"]:
        return list(ALL_SCHEMES)
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML scenario file (defaults when omitted)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--schemes", type=_scheme_list, help="comma-separated scheme names or 'all'")
    common.add_argument("--snapshots", type=int, help="number of channel snapshots")
    common.add_argument("--parallel", type=int, default=1, help="worker processes over snapshots")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="uavicic", description="UAV uplink interference coordination experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run all schemes on one scenario and write report.json")
    sw = sub.add_parser("sweep", parents=[common], help="sweep one parameter and write a CSV table")
    sw.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    sw.add_argument("--values", required=True, type=_float_list, help="comma-separated axis values")
    rg = sub.add_parser("region", parents=[common], help="trace the rate region over weight ratios")
    rg.add_argument("--ratios", type=_float_list, default=[0.1, 0.5, 1.0, 2.0, 10.0],
                    help="comma-separated mu_g/mu_u ratios")
    vc = sub.add_parser("validate-config", parents=[common], help="check a config file and print it resolved")
    vc.add_argument("--quiet", action="store_true")
    return parser


def _resolve(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.snapshots is not None:
        changes["snapshots"] = args.snapshots
    if args.schemes is not None:
        changes["schemes"] = args.schemes
    return cfg.replace(**changes) if changes else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = _resolve(args)
        if args.parallel < 1:
            raise ConfigError("--parallel", "must be >= 1")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate-config":
            if not args.quiet:
                sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        if args.command == "run":
            report = run_scenario(cfg, args.parallel)
            path = write_report(report, args.out)
            log.info("wrote %s", path)
            print(path)
        elif args.command == "sweep":
            rows, reports = sweep(cfg, args.axis, args.values, parallel=args.parallel)
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / f"sweep_{args.axis}.csv"
            path.write_text(sweep_csv(rows))
            for v, rep in zip(args.values, reports):
                (args.out / f"sweep_{args.axis}_{v:g}.json").write_text(report_json(rep))
            print(path)
        elif args.command == "region":
            rows, _ = rate_region(cfg, args.ratios, parallel=args.parallel)
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / "region.csv"
            path.write_text(region_csv(rows))
            print(path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # bad sweep values and similar argument problems
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
