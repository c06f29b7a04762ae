import logging

import pytest

from tslim import _logging
from tslim._logging import (
    ALWAYS_LOG_LEVEL,
    CLIFormatter,
    log,
    set_logging_level_from_verbosity,
)


@pytest.fixture
def root_level():
    level = logging.getLogger().level
    yield
    logging.getLogger().setLevel(level)


def make_record(level: int) -> logging.LogRecord:
    return logging.LogRecord("tslim.ntk", level, __file__, 7, "slope 0.75", None, None)


class TestVerbosity:
    @pytest.mark.parametrize(
        "verbosity, level",
        [
            (None, logging.WARNING),
            (0, logging.WARNING),
            (1, logging.INFO),
            (2, logging.DEBUG),
        ],
    )
    def test_levels(self, root_level, verbosity, level):
        set_logging_level_from_verbosity(verbosity)
        assert logging.getLogger().level == level

    @pytest.mark.parametrize("verbosity", [-1, 3])
    def test_unknown(self, root_level, verbosity):
        with pytest.raises(ValueError, match=f"Unknown verbosity level: {verbosity}"):
            set_logging_level_from_verbosity(verbosity)


class TestCLIFormatter:
    def test_info_is_plain(self):
        text = CLIFormatter().format(make_record(logging.INFO))
        assert "slope 0.75" in text
        assert "INFO/" not in text

    def test_always_log_is_plain(self):
        text = CLIFormatter().format(make_record(ALWAYS_LOG_LEVEL))
        assert "always_log/" not in text

    def test_warning_names_origin(self):
        text = CLIFormatter().format(make_record(logging.WARNING))
        assert "WARNING/tslim.ntk/" in text
        assert "slope 0.75" in text


def test_log_prints_outside_workers(capsys):
    assert not _logging.in_worker
    log("written: summary.json")
    assert capsys.readouterr().out == "written: summary.json\n"
