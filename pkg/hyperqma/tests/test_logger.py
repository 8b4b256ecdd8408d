# hyperqma/tests/test_logger.py

import logging

import pytest

from hyperqma.core import logger as logger_module
from hyperqma.core.logger import Logger, set_default_level


@pytest.fixture
def restore_level():
    yield
    set_default_level(logging.INFO)


def test_logger_defaults():
    log = Logger(name="hyperqma.test.defaults").get()
    assert log.level == logging.INFO
    assert log.propagate is False
    assert [type(h) for h in log.handlers] == [logging.StreamHandler]


def test_no_duplicate_handlers():
    Logger(name="hyperqma.test.twice")
    log = Logger(name="hyperqma.test.twice").get()
    assert len(log.handlers) == 1


def test_explicit_level_wins():
    assert Logger(name="hyperqma.test.debug", level=logging.DEBUG).get().level == logging.DEBUG


def test_default_level_reaches_existing_loggers(restore_level):
    log = Logger(name="hyperqma.test.verbose").get()
    set_default_level(logging.DEBUG)
    assert log.level == logging.DEBUG
    assert Logger(name="hyperqma.test.later").get().level == logging.DEBUG


def test_file_logging(tmp_path):
    path = tmp_path / "logs" / "run.log"
    log = Logger(name="hyperqma.test.file", log_to_file=True, log_file=str(path)).get()
    log.info("🟢 solve finished")
    for handler in log.handlers:
        handler.flush()
    assert "[INFO] 🟢 solve finished" in path.read_text(encoding="utf-8")


def test_set_log_file_mirrors_existing_loggers(tmp_path, monkeypatch):
    monkeypatch.setattr(Logger, "created", set())
    monkeypatch.setattr(logger_module, "_default_log_file", None)
    log = Logger(name="hyperqma.test.mirrored", level=logging.WARNING).get()
    path = tmp_path / "mirror.log"
    logger_module.set_log_file(str(path))
    assert log.level == logging.WARNING
    assert any(isinstance(h, logging.FileHandler) for h in log.handlers)
    for handler in log.handlers:
        if isinstance(handler, logging.FileHandler):
            log.removeHandler(handler)
            handler.close()
