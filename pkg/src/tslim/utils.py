import argparse
import time
from pathlib import Path

from tslim._logging import log
from tslim.analysis import parse_triplets
from tslim.errors import ValidationError
from tslim.typedefs import Triplet


def log_end_time(start_time: float, what: str = "Run"):
    """
    Output the amount of passed time since 'start_time'.
    """
    end_time = time.time()
    log(f"{what} done in {end_time - start_time:.1f} s.")


def get_pos_number(arg):
    try:
        arg = int(arg)
        if 0 <= arg:
            return arg
        else:
            raise ValueError
    except (TypeError, ValueError) as e:
        raise argparse.ArgumentTypeError(
            f"Invalid value '{arg}', use a non-negative integer number."
        ) from e


def get_seed(arg):
    try:
        seed = int(arg)
    except (TypeError, ValueError) as e:
        raise argparse.ArgumentTypeError(
            f"Invalid seed '{arg}', use an integer number."
        ) from e
    if seed < 0:
        raise argparse.ArgumentTypeError(
            f"Invalid seed '{arg}', seeds of numpy random streams are non-negative."
        )
    return seed


def get_triplets(arg) -> list[Triplet]:
    try:
        return parse_triplets(arg)
    except ValidationError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def get_version() -> str:
    my_dir = Path(__file__).resolve().parent
    version_file = my_dir / "version.txt"
    with open(version_file, "r", encoding="utf-8") as file:
        version = file.read().strip()
    return version
