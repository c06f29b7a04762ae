"""
Logging setup for the tslim CLI and its worker processes.

Every module defines its own logger with getLogger(__name__); only this module
configures the root logger. Functions here look the root logger up on each call, so
that in a worker process the root logger of that process is the one configured.
"""

import logging
import multiprocessing.util as multiprocessing_util
import queue
from collections.abc import Mapping
from logging import LogRecord, StreamHandler, getLogger
from logging.handlers import QueueHandler, QueueListener
from typing import Any

import colorlog

from tslim.constants import DEBUG_MULTIPROCESSING, DEFAULT_VERBOSITY

# Warnings, errors and debug output carry their origin
ORIGIN_FORMAT = "%(levelname)s/%(name)s/%(funcName)s %(lineno)s\n%(message)s\n"
PLAIN_FORMAT = "%(message)s"

ALWAYS_LOG_LEVEL = (logging.CRITICAL + logging.ERROR) // 2  # 45
ALWAYS_LOG_LEVEL_NAME = "always_log"
PLAIN_LEVELS = frozenset({logging.INFO, ALWAYS_LOG_LEVEL})

# Index is the number of v's on the command line
VERBOSITY_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)

LEVEL_COLORS: Mapping[str, str] = {
    "DEBUG": "cyan",
    "INFO": "white",
    "WARNING": "yellow",
    "ERROR": "red",
    ALWAYS_LOG_LEVEL_NAME: "white",
    "CRITICAL": "red,bg_white",
}

logging.addLevelName(ALWAYS_LOG_LEVEL, ALWAYS_LOG_LEVEL_NAME)

in_worker = False
logger = getLogger(__name__)

if DEBUG_MULTIPROCESSING:
    multiprocessing_util.log_to_stderr()


class CLIFormatter(colorlog.ColoredFormatter):
    """Colored output; INFO and always_log records look like print() output."""

    def __init__(self, log_colors: Mapping[str, str] = LEVEL_COLORS):
        super().__init__(log_colors=dict(log_colors))

    def format(self, record: LogRecord) -> str:
        fmt = PLAIN_FORMAT if record.levelno in PLAIN_LEVELS else ORIGIN_FORMAT
        self._style._fmt = "%(log_color)s" + fmt
        return super().format(record)


def ini_for_cli(verbosity: int = DEFAULT_VERBOSITY) -> None:
    set_logging_level_from_verbosity(verbosity)
    add_cli_handler()


def set_logging_level_from_verbosity(verbosity: int | None) -> None:
    if verbosity is None:
        verbosity = DEFAULT_VERBOSITY
    if not 0 <= verbosity < len(VERBOSITY_LEVELS):
        raise ValueError(f"Unknown verbosity level: {verbosity}")
    getLogger().setLevel(VERBOSITY_LEVELS[verbosity])


def add_cli_handler() -> None:
    root_logger = getLogger()
    # main() may run more than once in a single interpreter, e.g. from tests
    if not any(getattr(h, "tslim_cli", False) for h in root_logger.handlers):
        root_logger.addHandler(get_cli_handler())


def get_cli_handler() -> StreamHandler:
    cli_handler = StreamHandler()
    cli_handler.setFormatter(CLIFormatter())
    cli_handler.tslim_cli = True  # type: ignore[attr-defined]
    return cli_handler


# Initializer of the sweep worker processes, which share no memory with the parent
def ini_worker_for_multiprocessing(logging_queue: queue.Queue, verbosity: int) -> None:
    global in_worker
    root_logger = getLogger()
    root_logger.handlers.clear()
    root_logger.addHandler(QueueHandler(logging_queue))
    set_logging_level_from_verbosity(verbosity)
    in_worker = True


def start_logging_listener(logging_queue: queue.Queue) -> QueueListener:
    """Forward worker records to a CLI handler of the parent; caller stops it."""
    queue_listener = QueueListener(logging_queue, get_cli_handler())
    queue_listener.start()
    return queue_listener


def log(arg: Any, end: str = "\n", flush: bool = False) -> None:
    """User-facing output: written file names and run summaries."""
    if in_worker:  # stdout of a worker process is not the terminal of the user
        logger.log(ALWAYS_LOG_LEVEL, arg)
    else:
        print(arg, end=end, flush=flush)
