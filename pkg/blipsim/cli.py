from argparse import ArgumentParser
from functools import partial
from blipsim import __version__
from blipsim.config import PROCESS_KINDS, schema_default
from blipsim.core import CONFIG_ERRORS, EXIT_CONFIG, EXIT_FAILURE, Runner
from blipsim.store import StoreError

import signal
import sys
import traceback


def signal_handler(runner, signum, frame):
    """Handler receiving signals.

    :returns: Nothing
    """

    if signum in (signal.SIGINT, signal.SIGTERM):
        runner.stop()


def _add(parser, subcommand, flag, help, **kwargs):
    field = flag.lstrip("-").replace("-", "_")
    default = schema_default(subcommand, field)
    if default is not None:
        help = f"{help} (default: {default})"
    parser.add_argument(flag, default=None, help=help, **kwargs)


def _ladder_flags(parser, subcommand):
    _add(parser, subcommand, "--n", "Comma separated size ladder", type=str)
    _add(parser, subcommand, "--reps", "Replicas per size", type=int)
    _add(parser, subcommand, "--cell-budget", "Largest rectangle, in cells", type=int)


def _check_flags(parser, subcommand):
    _add(parser, subcommand, "--check", "Compare the last size to its reference", action="store_true")
    _add(parser, subcommand, "--tolerance", "Tolerance of --check", type=float)


def build_parser():
    """Build the command line parser, every default read from the configuration schemas.

    :returns: ArgumentParser
    """

    parser = ArgumentParser(description="blipsim -- Bernoulli longest increasing paths and last passage percolation")
    parser.add_argument("-v", "--version", action="version", version=__version__)

    common = ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=str, default=None, help="Path to a YAML configuration file")
    common.add_argument("-o", "--output", type=str, default=None,
                        help=f"Run directory (default: {schema_default('core', 'output')})")
    common.add_argument("--workers", type=int, default=None,
                        help=f"Worker threads, also read from BLIPSIM_WORKERS (default: {schema_default('core', 'workers')})")
    common.add_argument("--log-level", type=str, default=None,
                        help=f"Log level (default: {schema_default('core', 'log_level')})")

    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    def subparser(name, help):
        sub = subparsers.add_parser(name, parents=[common], help=help, description=help)
        _add(sub, name, "--p", "Mark probability, in (0, 1)", type=float)
        _add(sub, name, "--seed", "Master seed, decimal or 0x-prefixed", type=str)
        return sub

    sub = subparser("simulate", "Replicas of L(m, n) or G(m, n)")
    _ladder_flags(sub, "simulate")
    _add(sub, "simulate", "--m", "Rectangle width, n when omitted", type=int)
    _add(sub, "simulate", "--model", "blip or lpp", type=str, choices=["blip", "lpp"])
    _add(sub, "simulate", "--table", "Dump the whole table of the first replica", action="store_true")

    sub = subparser("shape", "n^-1 L(nx, ny) against the shape function")
    _ladder_flags(sub, "shape")
    _add(sub, "shape", "--x", "Horizontal shape coordinate", type=float)
    _add(sub, "shape", "--y", "Vertical shape coordinate", type=float)
    _check_flags(sub, "shape")

    sub = subparser("soft-edge", "n - L near the soft edge, m = n/p - x n^a")
    _ladder_flags(sub, "soft-edge")
    _add(sub, "soft-edge", "--x", "Amplitude of the window", type=float)
    _add(sub, "soft-edge", "--a", "Window exponent, in (0, 1)", type=float)
    _add(sub, "soft-edge", "--dn-rule", "Normalization d_n for a <= 1/2: power, log or power_log", type=str)
    _add(sub, "soft-edge", "--dn-gamma", "Exponent of the power and power_log rules", type=float)
    _add(sub, "soft-edge", "--dn-kappa", "Exponent of the log rule", type=float)
    _add(sub, "soft-edge", "--epsilon", "Exceedance threshold for a <= 1/2", type=float)
    _add(sub, "soft-edge", "--regime", "probability or almost-sure convergence for a <= 1/2", type=str)
    _add(sub, "soft-edge", "--event", "Estimate P{n - L >= (cn)^(2a - 1)} instead", action="store_true")
    _add(sub, "soft-edge", "--c", "Strip constant of --event", type=float)
    _add(sub, "soft-edge", "--method", "auto, fast or direct", type=str)
    _add(sub, "soft-edge", "--direct-threshold", "Largest n sampled directly by the auto method", type=int)
    _add(sub, "soft-edge", "--strip-budget", "Largest strip of the fast sampler, in cells", type=int)
    _check_flags(sub, "soft-edge")

    sub = subparser("hard-edge", "G(c1 n, y n^beta) fluctuations against 2 sigma sqrt(c1 y)")
    _ladder_flags(sub, "hard-edge")
    _add(sub, "hard-edge", "--c1", "Length ratio j / n", type=float)
    _add(sub, "hard-edge", "--y", "Width amplitude", type=float)
    _add(sub, "hard-edge", "--beta", "Width exponent, in (0, 1)", type=float)
    _check_flags(sub, "hard-edge")

    sub = subparser("identities", "Exact pathwise identities on random fields")
    _add(sub, "identities", "--size", "Side of the checked square", type=int)
    _add(sub, "identities", "--fields", "Number of random fields", type=int)
    _add(sub, "identities", "--checks", "Comma separated identities", type=str)
    _add(sub, "identities", "--horizon", "Last simulated R-process time", type=int)

    sub = subparser("processes", "Evolve one particle process and dump it")
    _add(sub, "processes", "--kind", "Process", type=str, choices=list(PROCESS_KINDS))
    _add(sub, "processes", "--particles", "Number of particles", type=int)
    _add(sub, "processes", "--steps", "Number of time steps", type=int)
    _add(sub, "processes", "--stream", "Stream id of the field", type=str)
    _add(sub, "processes", "--spacing", "Initial spacing of the z and w processes", type=int)
    _add(sub, "processes", "--max-jump", "Jump cap of the rightmost w particle", type=int)

    sub = subparser("crosscheck", "P{L(m, n) <= m - j} against P{G(n - m + j, j) <= n + j - 1}")
    _add(sub, "crosscheck", "--m", "Rectangle width", type=int)
    _add(sub, "crosscheck", "--n", "Rectangle height", type=int)
    _add(sub, "crosscheck", "--j", "Event index", type=int)
    _add(sub, "crosscheck", "--reps", "Replicas", type=int)
    _add(sub, "crosscheck", "--cell-budget", "Largest rectangle, in cells", type=int)

    return parser


def run(argv):
    """Run one subcommand.

    :argv: Command line arguments, without the program name
    :returns: 0 on success, 1 on a failed check or an error, 2 on an invalid configuration
    """

    try:
        cmdline_args = vars(build_parser().parse_args(argv))
    except SystemExit as e:
        return e.code

    subcommand = cmdline_args.pop("subcommand")
    config_path = cmdline_args.pop("config")
    runner = Runner(subcommand, cmdline_args, config_path)

    # Attach interrupts
    previous = {sig: signal.signal(sig, partial(signal_handler, runner)) for sig in (signal.SIGINT, signal.SIGTERM)}

    try:
        runner.initialise()
        return runner.run()

    except CONFIG_ERRORS as e:
        print(e, file=sys.stderr)
        return EXIT_CONFIG

    except StoreError as e:
        print(e, file=sys.stderr)
        return EXIT_FAILURE

    except Exception:
        print("An unhandled exception occured.", file=sys.stderr)
        traceback.print_exc(file=sys.stderr)
        return EXIT_FAILURE

    finally:
        for sig, handler in previous.items():
            signal.signal(sig, handler)


def main():
    """Entrypoint of the blipsim command.

    :returns: Exit code
    """

    return run(sys.argv[1:])
