"""
Command-line front end of the AAS lab.

Each subcommand reads one JSON config, applies the command-line overrides,
runs through AASLabAPI and writes CSV/JSON artifacts to the output
directory.

Exit codes: 0 success, 2 configuration error, 3 numerical failure (including
sweeps that finished with failed points), 4 I/O failure.

Typical usage example:
  aas_lab sweep --config fig2.json --out runs/fig2 --threads 8
  aas_lab collapse --config collapse_zeta.json --out runs/fig2
"""

# Import argparse module for parsing command line arguments
import argparse
import logging
import sys

from . import __version__
from .api import AASLabAPI, log_message
from .config import apply_overrides, load_config
from .errors import AASLabError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

COMMANDS = ("sweep", "collapse", "fit", "fidelity-map", "qfi", "wavefunction", "drift")

_HELP = {
    "sweep": "Phase-averaged zeta, IPR, gap (and QFI) over an (L, delta, h) grid.",
    "collapse": "Cost-function data collapse of a sweep CSV.",
    "fit": "Log-log power-law fit of one sweep column against h.",
    "fidelity-map": "Fidelity to the pure-Stark ground state over (delta, h).",
    "qfi": "QFI versus system size and its scaling exponent.",
    "wavefunction": "Ground-state amplitudes of a single instance.",
    "drift": "nu, s and z per delta < 0 from a multi-delta sweep CSV.",
}


def print_history(api):
    """Prints the run ledger.

  Args:
    api (AASLabAPI): The API instance.

  """

    runs = api.history()
    print("Run history:")
    for run in runs:
        print(f"#{run['id']} {run['date']} {run['command']} seed={run['master_seed']} "
              f"status={run['status']} -> {run['output_path']}")


def print_result(result):
    """Prints the artifacts of a finished command."""
    for path in result.paths:
        print(path)
    if "reported" in result.report:
        print(f"{result.report['exponent']} = {result.report['reported']:.4f} "
              f"+/- {result.report['uncertainty']:.4f}")
    elif "exponent" in result.report:
        print(f"slope = {result.report['exponent']:.4f} +/- {result.report['stderr']:.4f}")
    elif "fit" in result.report:
        print(f"beta = {result.report['fit']['beta']:.4f} +/- {result.report['fit']['stderr']:.4f}")
    if result.failed_points:
        print(f"{len(result.failed_points)} point(s) failed; see the sidecar JSON", file=sys.stderr)


def run_command(api, command, args):
    """Loads, overrides and runs one subcommand.

  Args:
    api (AASLabAPI): The API instance.
    command (str): Subcommand name.
    args (argparse.Namespace): Parsed arguments.

  Returns:
    int: Exit code.

  """

    config = load_config(command, args.config)
    config = apply_overrides(config, command, seed=args.seed, samples=args.samples,
                             figure_faithful=args.figure_faithful)
    result = api.run(command, config)
    print_result(result)
    return EXIT_NUMERICAL if result.failed_points else EXIT_OK


def _add_common_flags(parser):
    parser.add_argument("--config", type=str, help="Path to the JSON run configuration.")
    parser.add_argument("--out", type=str, help="Output directory (default: $AAS_LAB_OUT_DIR or cwd).")
    parser.add_argument("--seed", type=int, help="Master seed, an unsigned 64-bit integer.")
    parser.add_argument("--samples", type=int, help="Number of phase samples per point.")
    parser.add_argument("--threads", type=int, help="Worker count (default: $AAS_LAB_THREADS or 1).")
    parser.add_argument("--figure-faithful", action="store_true",
                        help="Use the sample counts of the published figures.")


def build_parser():
    """Create the argument parser with one subparser per command."""
    parser = argparse.ArgumentParser(prog="aas_lab", description="Aubry-Andre-Stark localization lab.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    for command in COMMANDS:
        _add_common_flags(subparsers.add_parser(command, help=_HELP[command], description=_HELP[command]))
    history = subparsers.add_parser("history", help="List the run ledger of the output directory.")
    history.add_argument("--out", type=str, help="Output directory holding the ledger.")
    return parser


def main(argv=None):
    """Main function."""

    # Create argument parser
    parser = build_parser()

    # Parse arguments
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help()
        return EXIT_CONFIG

    try:
        # Create API instance
        api = AASLabAPI(out_dir=args.out, threads=getattr(args, "threads", None))

        # Define actions
        actions = {command: (lambda command=command: run_command(api, command, args)) for command in COMMANDS}
        actions["history"] = lambda: print_history(api) or EXIT_OK

        return actions[args.command]()
    except AASLabError as error:
        log_message(f"{type(error).__name__}: {error}", logging.ERROR)
        return error.exit_code


# Check if running as standalone script
if __name__ == "__main__":
    sys.exit(main())
