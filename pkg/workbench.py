import argparse
import json
import logging
import sys
from typing import List, Optional

import yaml
from pydantic import ValidationError

from src.errors import ResourceGuardError
from src.models.run_config import SUITES, RunConfig
from src.services.suite_runner import SuiteRunner
from src.utils.config import load_config

SUBCOMMANDS = {
    "verify-courant": ("Courant axioms for the configured and random twists", ["courant-axioms"]),
    "hodge-report": ("Hodge decomposition, Green operator and Laplacian kernels", ["hodge"]),
    "derivation-split": ("split of derivations into exact and harmonic parts", ["derivations"]),
    "group-check": ("group laws, actions and membership of generalized diffeomorphisms", ["group"]),
    "slice-report": ("deformation complexes and orbit projectors in the matrix regime", ["slice"]),
    "strata-demo": ("isometry groups and strata of the bundled example family", ["strata"]),
    "all": ("every suite selected by the configuration", None),
}


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="run configuration (JSON or YAML), default config.yml")
    shared.add_argument("--seed", type=int, help="override the configured seed")
    shared.add_argument("--out", help="report directory")
    shared.add_argument("--format", choices=["json", "csv"], help="report file format")
    shared.add_argument("--tolerance-scale", type=float, help="multiply every acceptance tolerance")
    shared.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="workbench.py",
                                     description="Verification suites for twisted Courant algebroids on flat tori.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (description, _) in SUBCOMMANDS.items():
        subparsers.add_parser(name, parents=[shared], help=description, description=description)
    return parser


def load_run_config(args: argparse.Namespace) -> RunConfig:
    """Reads the configuration file and applies command-line overrides before validation."""
    data = load_config(args.config)
    if args.seed is not None:
        data["seed"] = args.seed
    output = dict(data.get("output") or {})
    if args.out is not None:
        output["directory"] = args.out
    if args.format is not None:
        output["format"] = args.format
    if output:
        data["output"] = output
    config = RunConfig.parse_obj(data)
    if args.tolerance_scale is not None:
        config = config.copy(update={"tolerances": config.tolerances.scaled(args.tolerance_scale)})
    return config


def print_config_errors(error: ValidationError):
    print('Configuration rejected:', file=sys.stderr)
    for entry in error.errors():
        location = '.'.join(str(part) for part in entry['loc'])
        print(f'  {location}: {entry["msg"]}', file=sys.stderr)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        config = load_run_config(args)
    except ValidationError as error:
        print_config_errors(error)
        return 2
    except (OSError, yaml.YAMLError) as error:
        print(f'Cannot read configuration: {error}', file=sys.stderr)
        return 2
    except ValueError as error:
        print(f'Configuration rejected: {error}', file=sys.stderr)
        return 2

    suites = SUBCOMMANDS[args.command][1] or [suite for suite in SUITES if suite in config.suites]
    runner = SuiteRunner(config)
    try:
        reports = runner.run(suites)
    except ResourceGuardError as error:
        print(f'Resource guard: {error}', file=sys.stderr)
        return 2

    written = runner.write_reports(reports)
    for report in reports:
        print('-' * 50)
        print(f'{report.suite}: {"PASS" if report.passed else "FAIL"} ({len(report.checks)} checks)')
        for check in report.checks:
            status = 'info' if check.informational else ('ok' if check.passed else 'FAIL')
            print(f'  [{status}] {check.check_id}: {check.residual:.3e} (tol {check.tolerance:.1e}) {check.anchor}')
        if args.command != 'all' and report.details:
            print(json.dumps(report.details, indent=2, sort_keys=True))
    print('-' * 50)
    print(f'Reports written: {", ".join(written)}')
    return 0 if all(report.passed for report in reports) else 1


if __name__ == '__main__':
    sys.exit(main())
