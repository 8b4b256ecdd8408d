"""
logger.py

Shared logger setup for hyperqma: one console handler per logger, an optional
file mirror, and a single timestamped format for solver, suite and sweep
messages.

Solvers, suites and sweeps all obtain their loggers through this class so that
the `--verbose` and `--log-file` switches on the command line reach every
component, including loggers created before the switches were parsed.
"""

import logging
from pathlib import Path

FORMAT = "%(asctime)s [%(levelname)s] %(message)s"

_default_level = logging.INFO
_default_log_file: str | None = None


def _file_handler(log_file: str) -> logging.FileHandler:
    Path(log_file).parent.mkdir(parents=True, exist_ok=True)
    fh = logging.FileHandler(log_file)
    fh.setFormatter(logging.Formatter(FORMAT))
    return fh


def set_default_level(level: int) -> None:
    """
    Sets the level used by loggers created from now on and updates the ones
    already handed out.

    Args:
        level (int): Logging level (e.g. logging.DEBUG).
    """
    global _default_level
    _default_level = level
    for name in Logger.created:
        logging.getLogger(name).setLevel(level)


def set_log_file(log_file: str) -> None:
    """
    Mirrors every package logger, present and future, into log_file.

    Args:
        log_file (str): Path of the log file; parent directories are created.
    """
    global _default_log_file
    _default_log_file = log_file
    for name in Logger.created:
        Logger(name, level=logging.getLogger(name).level, log_to_file=True, log_file=log_file)


class Logger:
    """
    Hands out a named logging.Logger with the package format and level,
    writing to the console and, once a log file is known, to that file.

    Attributes:
        logger (logging.Logger): The named logger behind this wrapper.
        created (set): Class-level registry of every logger name handed out.
    """

    created: set = set()

    def __init__(
        self,
        name: str = "hyperqma",
        level: int | None = None,
        log_to_file: bool | None = None,
        log_file: str | None = None,
    ):
        """
        Attaches the console handler and, if requested, the file handler.

        Args:
            name (str, optional): Name of the logger. Defaults to "hyperqma".
            level (int, optional): Logging level. Defaults to the package default level.
            log_to_file (bool, optional): Also log to a file. Defaults to True once set_log_file was called.
            log_file (str, optional): File path; defaults to the one given to set_log_file.

        Handlers already on the named logger are reused, so repeated calls are safe.
        """
        self.logger = logging.getLogger(name)
        self.logger.setLevel(_default_level if level is None else level)
        self.logger.propagate = False
        Logger.created.add(name)

        handlers = self.logger.handlers
        if not any(type(h) is logging.StreamHandler for h in handlers):
            ch = logging.StreamHandler()
            ch.setFormatter(logging.Formatter(FORMAT))
            self.logger.addHandler(ch)

        log_file = log_file or _default_log_file
        if log_to_file is None:
            log_to_file = log_file is not None
        if log_to_file and log_file and not any(isinstance(h, logging.FileHandler) for h in handlers):
            self.logger.addHandler(_file_handler(log_file))

    def get(self) -> logging.Logger:
        """
        The underlying logging.Logger.

        Returns:
            logging.Logger: Ready to use, handlers attached.
        """
        return self.logger
