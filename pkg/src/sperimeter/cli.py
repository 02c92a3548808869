"""Command line front end.

    sperimeter <subcommand> [--instance FILE] [--config FILE] [--out DIR] [options]

Exit codes: 0 success, 2 validation error, 3 failed check, 64 usage error.
"""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from sperimeter import constants
from sperimeter.client import Laboratory
from sperimeter.config import FORMATS, SUBCOMMANDS, RunConfig
from sperimeter.constants import ExitCode
from sperimeter.exception import LabError
from sperimeter.storage import FileStorageProvider

logger = logging.getLogger(constants.LOGGER_NAME)

HELP = {
    "perimeter": "Per_s and the Massari energy of the instance set",
    "curvature": "p.v. mean curvature at --point, or the Euler-Lagrange check",
    "minimize": "Exact minimizer of the instance by min-cut",
    "certify": "Λ certificate and sub/super-solution margins",
    "extension": "Extension of u = χ_E - χ_E^c to the upper half-space",
    "monotonicity": "Φ profile and its monotonicity check",
    "density": "Density ratios of E and E^c",
    "flatness": "Flatness and clean-ball constants",
    "stickiness": "Run an experiment spec and measure boundary jumps",
    "perturb": "Perturbation invariance of an experiment spec",
    "oracle": "Brute-force minimizer compared with min-cut",
    "calibrate": "EL tolerance constant and c̃ for (n, s, h)",
}


class LabArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with 64."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(ExitCode.USAGE.value, f"{self.prog}: error: {message}\n")


def _point(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"point must be comma-separated numbers, got {text!r}") from e


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", help="instance JSON file")
    common.add_argument("--config", help="run config file (.toml or .json); flags override its values")
    common.add_argument("--experiment", help="experiment spec (.toml or .json)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, help="worker threads")
    common.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--r-cut", dest="r_cut", type=float, help="kernel cutoff radius")
    common.add_argument("--near-tol", dest="near_tol", type=float, help="near-weight relative tolerance")
    common.add_argument("--lam", type=float, help="Λ")
    common.add_argument("--H", dest="H", type=float, help="constant prescribed curvature")
    common.add_argument("--radii", type=float, nargs="+", help="radii, increasing")
    common.add_argument("--deltas", type=float, nargs="+", help="p.v. exclusion radii, decreasing")
    common.add_argument("--point", dest="points", type=_point, action="append", help="evaluation point x,y[,z]")
    common.add_argument("--family", choices=["patches", "full"], help="competitor family")
    common.add_argument("--patch-size", dest="patch_size", type=int, help="largest patch")
    common.add_argument("--tol", type=float, help="monotonicity tolerance, fraction of the profile range")
    common.add_argument("--c-tilde", dest="c_tilde", type=float, help="calibrated c̃")
    common.add_argument("--calibration", help="calibration file; default calibration.json in the output directory")
    common.add_argument("--symmetry-axis", dest="symmetry_axis", type=int, help="mirror axis of the instance")
    common.add_argument("--n", type=int, help="dimension for calibrate")
    common.add_argument("--s", type=float, help="order for calibrate")
    common.add_argument("--h", type=float, help="cell size for calibrate")
    common.add_argument("--formats", nargs="+", choices=FORMATS, help="artifact formats")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = LabArgumentParser(prog="sperimeter", description="Fractional perimeter laboratory")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="subcommand", parser_class=LabArgumentParser)
    subparsers.required = True
    common = _common_arguments()
    for name in SUBCOMMANDS:
        subparsers.add_parser(name, parents=[common], help=HELP[name])
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return ExitCode.USAGE.value if e.code not in (0, None) else ExitCode.SUCCESS.value
    overrides = {k: v for k, v in vars(args).items() if k != "config"}
    logging.basicConfig(level=(args.log_level or "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = RunConfig.from_file(args.config) if args.config else RunConfig()
        config = config.merged(overrides)
        config.storage_provider = FileStorageProvider(config.out)
        laboratory = Laboratory(config)
        try:
            outcome = laboratory.run(args.subcommand)
        finally:
            laboratory.shutdown()
    except LabError as e:
        logger.error(f"{args.subcommand} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return ExitCode.VALIDATION_ERROR.value
    if not outcome.passed:
        print(f"{args.subcommand}: check failed, see {config.out}/{args.subcommand}.json", file=sys.stderr)
        return ExitCode.CHECK_FAILURE.value
    return ExitCode.SUCCESS.value


if __name__ == "__main__":
    sys.exit(main())
