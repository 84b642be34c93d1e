"""Command line entry point: BER sweeps, oracle validation, beta calibration."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import ConfigError, calibrate_beta, load_config, run_sweep
from .numerics import NumericalError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wlmbdf",
        description="Link-level BER simulator for widely-linear multi-branch "
                    "decision-feedback detection under receiver I/Q imbalance.")
    sub = parser.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", help="run a BER sweep and write a CSV")
    ber.add_argument("--config", required=True, help="YAML configuration file")
    ber.add_argument("--out", help="output CSV path (overrides the config)")
    ber.add_argument("--seed", type=int, help="master seed (overrides the config)")
    ber.add_argument("--threads", type=int, default=1, help="worker processes")

    sub.add_parser("validate", help="run the built-in oracle suite")

    cal = sub.add_parser("calibrate-beta",
                         help="sweep the feedback scaling grid and print the best")
    cal.add_argument("--config", required=True, help="YAML configuration file")
    cal.add_argument("--snr", type=float, help="calibration SNR in dB "
                                               "(default: middle of the grid)")
    return parser


def _cmd_ber(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, output=args.out)
    records = run_sweep(cfg, threads=max(args.threads, 1))
    for rec in records:
        print(f"{rec.detector:10s} snr={rec.snr_db:6.2f} dB it={rec.iteration} "
              f"ber={rec.ber:.6g} (+-{rec.ci_halfwidth:.2g}, "
              f"{rec.bit_errors}/{rec.trials_bits})")
    if cfg.output:
        print(f"wrote {cfg.output}")
    return EXIT_OK


def _cmd_validate(_args) -> int:
    from .validation import validate_all
    results = validate_all()
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


def _cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    best, table = calibrate_beta(cfg, snr_db=args.snr)
    for beta, ber in table:
        print(f"beta={beta:4.2f}  ber={ber:.6g}")
    print(f"chosen beta: {best}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "ber":
            return _cmd_ber(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "calibrate-beta":
            return _cmd_calibrate(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
