"""
Logging setup shared by the library and the command line.
"""
import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

_HANDLER_TAG = "_discqueue_handler"


def configure_logging(level: str = "WARNING", log_file: Optional[str] = None) -> logging.Logger:
    """
    Attach a rich handler (stderr) and an optional file handler to the package logger.

    Calling it again replaces the handlers installed by a previous call.

    Args:
        level: Logging level name
        log_file: Optional path of a plain-text log file

    Returns:
        The ``discqueue`` logger
    """
    logger = logging.getLogger("discqueue")
    logger.setLevel(level.upper())

    for handler in list(logger.handlers):
        if getattr(handler, _HANDLER_TAG, False):
            logger.removeHandler(handler)
            handler.close()

    console_handler = RichHandler(console=Console(stderr=True), show_path=False)
    setattr(console_handler, _HANDLER_TAG, True)
    logger.addHandler(console_handler)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        setattr(file_handler, _HANDLER_TAG, True)
        logger.addHandler(file_handler)

    logger.propagate = False
    return logger
