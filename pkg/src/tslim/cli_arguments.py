from argparse import ArgumentParser

from tslim.experiment import ExperimentKind
from tslim.tiphelp import Help
from tslim.utils import get_pos_number, get_seed, get_triplets, get_version

hlp = Help()


def define_arguments(parser: ArgumentParser):
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version=get_version(),
        help=hlp.version,
    )
    parser.add_argument(
        "-v",
        "--verbosity",
        action="count",
        default=0,
        help=hlp.verbosity,
    )
    parser.add_argument(
        "--multicore",
        action="store_true",
        help=hlp.multicore,
    )

    subparsers = parser.add_subparsers(
        dest="subcommand",
        metavar="SUBCOMMAND",
        required=True,
    )
    for kind in ExperimentKind:
        subparser = subparsers.add_parser(
            kind.subcommand,
            help=getattr(hlp, kind.subcommand.replace("-", "_")),
        )
        define_experiment_arguments(subparser)
        if kind is ExperimentKind.ANALYZE_TRAJECTORY:
            define_analyze_arguments(subparser)


def define_experiment_arguments(parser: ArgumentParser):
    parser.add_argument(
        "-c",
        "--config",
        required=True,
        metavar="PATH",
        help=hlp.config,
    )
    parser.add_argument(
        "-o",
        "--out",
        metavar="DIR",
        help=hlp.out,
    )
    parser.add_argument(
        "-s",
        "--seed",
        type=get_seed,
        metavar="INT",
        help=hlp.seed,
    )


def define_analyze_arguments(parser: ArgumentParser):
    parser.add_argument(
        "--warm-start",
        type=get_pos_number,
        metavar="INDEX",
        help=hlp.warm_start,
    )
    parser.add_argument(
        "--triplets",
        type=get_triplets,
        metavar='"i,j,k;..."',
        help=hlp.triplets,
    )
