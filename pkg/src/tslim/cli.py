import dataclasses
import multiprocessing
import os
import sys
import textwrap
from argparse import ArgumentParser, Namespace, RawDescriptionHelpFormatter
from logging import getLogger

from tslim import _logging
from tslim.cli_arguments import define_arguments
from tslim.errors import ArchiveError, SpeedLimitError
from tslim.experiment import ExperimentConfig, ExperimentKind, load_config
from tslim.runner import run_experiment
from tslim.tiphelp import Help

# Limit the width of the help text.
os.environ["COLUMNS"] = "90"

# -vv shows debug output, more v's change nothing
MAX_VERBOSITY = 2

logger = getLogger(__name__)


def main(argv: list[str] | None = None) -> int:
    parser = ArgumentParser(
        prog="tslim",
        description=textwrap.dedent(Help.help_doc),
        formatter_class=RawDescriptionHelpFormatter,
    )
    define_arguments(parser)

    args = sys.argv[1:] if argv is None else argv
    # For zero arguments, print help and exit.
    if not args:
        parser.print_help()
        return 0

    namespace = parser.parse_args(args)
    verbosity = min(namespace.verbosity, MAX_VERBOSITY)
    _logging.ini_for_cli(verbosity)
    logger.debug(f"{namespace = }")

    try:
        kind = ExperimentKind.from_subcommand(namespace.subcommand)
        cfg = load_config(namespace.config, kind, namespace.out, namespace.seed)
        if kind is ExperimentKind.ANALYZE_TRAJECTORY:
            cfg = apply_analyze_options(cfg, namespace)
        run_experiment(cfg, multicore=namespace.multicore, verbosity=verbosity)
    except SpeedLimitError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        location = f"{e.filename}: " if e.filename else ""
        logger.error(f"{location}{e.strerror or e}")
        return ArchiveError.exit_code
    return 0


def apply_analyze_options(
    cfg: ExperimentConfig, namespace: Namespace
) -> ExperimentConfig:
    """--warm-start and --triplets take precedence over the config file."""
    parameters = dict(cfg.parameters)
    if namespace.warm_start is not None:
        parameters["warm_start"] = namespace.warm_start
    if namespace.triplets is not None:
        parameters["triplets"] = [list(triplet) for triplet in namespace.triplets]
    return dataclasses.replace(cfg, parameters=parameters)


if __name__ == "__main__":
    multiprocessing.freeze_support()
    sys.exit(main())
