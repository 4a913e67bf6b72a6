#!/usr/bin/env python3
"""
QKD Downlink Simulator

Seeded simulation of a CubeSat-to-ground BB84 decoy-state downlink pass,
plus the bench calibration tools.

Usage:
    python run.py simulate scenarios/ideal.json                # Simulate one pass
    python run.py simulate scenarios/nominal_pass.json --seed 7   # Override the seed
    python run.py calibrate histogram --tags fixtures/tags_20mhz.txt
    python run.py report runs/ideal                            # Print a stored report
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from config import Config, load_scenario
from core.errors import ConfigurationError, ParseError, QkdSimError
from calibration.runner import SUBCOMMANDS, run_calibration
from simulation.pass_runner import run_pass

EXIT_USAGE = 1
EXIT_FAULT = 2

# Calibration inputs by subcommand: (option, input name)
CALIBRATION_INPUTS = {
    "histogram": [("tags", "timetags")],
    "roi": [("tags", "timetags"), ("rois", "rois")],
    "equalize": [("calibration", "calibration")],
    "sweep-fit": [("sweep", "sweep")],
    "divergence": [("spots", "spots")],
}


def setup_logging(verbose: bool = False) -> None:
    """Configure logging."""
    level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _parse_params(pairs: Optional[List[str]]) -> Dict[str, object]:
    """Turn `key=value` options into a dict; values parse as JSON when they can."""
    params: Dict[str, object] = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(f"parameter {pair!r} is not key=value")
        key, raw = pair.split("=", 1)
        try:
            params[key] = json.loads(raw)
        except json.JSONDecodeError:
            params[key] = raw
    return params


def cmd_simulate(args: argparse.Namespace, config: Config) -> int:
    scenario, digest = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    out_dir = Path(args.out) if args.out else Path(config.out_dir) / scenario.session_id

    report = run_pass(scenario, out_dir, config, digest)
    r = report.key_rate
    print(
        f"{scenario.session_id}: sifted {r.sifted_length}, qber {r.qber:.4f}, "
        f"secure {r.secure_length} bits" + (f" (aborted: {r.abort_reason})" if r.aborted else "")
    )
    print(f"Report written to {out_dir}/")
    if report.fault is not None:
        print(f"error {report.fault}: {r.abort_reason}", file=sys.stderr)
        return EXIT_FAULT
    return 0


def cmd_calibrate(args: argparse.Namespace, config: Config) -> int:
    inputs = {
        name: getattr(args, option)
        for option, name in CALIBRATION_INPUTS[args.subcommand]
        if getattr(args, option, None)
    }
    out_dir = Path(args.out) if args.out else Path(config.calibration_dir) / args.subcommand
    run_calibration(args.subcommand, inputs, _parse_params(args.param), out_dir)
    print(f"Calibration report written to {out_dir}/")
    return 0


def cmd_report(args: argparse.Namespace, config: Config) -> int:
    run_dir = Path(args.run_dir)
    combined = run_dir / "combined_report.txt"
    if not combined.exists():
        raise ConfigurationError(f"{run_dir} holds no combined_report.txt")
    print(combined.read_text(), end="")

    report_file = run_dir / "report.json"
    if report_file.exists():
        try:
            data = json.loads(report_file.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(e.msg, str(report_file), e.lineno, e.colno) from None
        r = data.get("key_rate", {})
        print(
            f"key rate: secure {r.get('secure_length', 0)} of {r.get('sifted_length', 0)} "
            f"sifted bits, qber {r.get('qber', 0.0):.4f}, "
            f"config sha256 {data.get('config_sha256', '')[:12]}"
        )
    return 0


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors follow the one-line error format."""

    def error(self, message: str) -> None:
        print(f"error E_USAGE: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(description="CubeSat QKD downlink simulator")
    parser.add_argument("--env", type=str, default=None, help="Path to .env file")
    parser.add_argument("-v", "--verbose", action="store_true", help="Verbose logging")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    simulate = commands.add_parser("simulate", help="Simulate one pass")
    simulate.add_argument("scenario", help="Scenario JSON file")
    simulate.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    simulate.add_argument("--out", type=str, default=None, help="Output directory")
    simulate.set_defaults(handler=cmd_simulate)

    calibrate = commands.add_parser("calibrate", help="Run a calibration analysis")
    calibrate.add_argument("subcommand", choices=sorted(SUBCOMMANDS))
    calibrate.add_argument("--tags", help="Timetag file")
    calibrate.add_argument("--rois", help="ROI file")
    calibrate.add_argument("--calibration", help="Diode calibration table")
    calibrate.add_argument("--sweep", help="HWP sweep file")
    calibrate.add_argument("--spots", help="Spot-size file")
    calibrate.add_argument(
        "--param", action="append", metavar="KEY=VALUE", help="Analysis parameter (repeatable)"
    )
    calibrate.add_argument("--out", type=str, default=None, help="Output directory")
    calibrate.set_defaults(handler=cmd_calibrate)

    report = commands.add_parser("report", help="Print a stored run report")
    report.add_argument("run_dir", help="Run output directory")
    report.set_defaults(handler=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = Config(env_path=args.env)
        return args.handler(args, config)
    except QkdSimError as e:
        print(e.one_line(), file=sys.stderr)
        if isinstance(e, (ConfigurationError, ParseError)):
            return EXIT_USAGE
        return EXIT_FAULT
    except FileNotFoundError as e:
        print(f"error E_CONFIG: {e.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
