import logging
import sys
import os
from typing import Optional, Union

Level = Union[int, str]


def _level(value: Optional[Level], fallback: int = logging.INFO) -> int:
    if value is None:
        return fallback
    if isinstance(value, str):
        resolved = logging.getLevelName(value.upper())
        return resolved if isinstance(resolved, int) else fallback
    return value


def _attach(logger: logging.Logger, handler: logging.Handler, level: int, formatter: logging.Formatter) -> None:
    handler.setLevel(level)
    handler.setFormatter(formatter)
    logger.addHandler(handler)


def setup_logger(
    name: str = "unidec",
    log_file: Optional[str] = None,
    level: Level = logging.INFO,
    format_str: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    console_level: Optional[Level] = None
) -> logging.Logger:
    """
    Set up a logger with a stderr console handler and an optional file handler.

    Reports and tables go to stdout, so log records stay on stderr. Handlers
    from an earlier call are replaced; repeated CLI invocations in one process
    (tests) do not duplicate output.

    Args:
        name: Name of the logger ("" configures the root logger)
        log_file: Path to log file (optional)
        level: Level of the logger and the file handler, as a number or a name
        format_str: Log format string
        console_level: Threshold of the console handler (defaults to ``level``)

    Returns:
        Configured logger
    """
    file_level = _level(level)
    logger = logging.getLogger(name)
    logger.setLevel(min(file_level, _level(console_level, file_level)))
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(format_str)
    _attach(logger, logging.StreamHandler(sys.stderr), _level(console_level, file_level), formatter)

    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        _attach(logger, logging.FileHandler(log_file), file_level, formatter)

    return logger
