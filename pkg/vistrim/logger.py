"""Logger shared by the vistrim modules"""
import logging

_LOGGER_NAME = "vistrim"


def logger() -> logging.Logger:
    """Get the package logger

    :return: The logger named after the package
    """
    return logging.getLogger(_LOGGER_NAME)


def set_level(level: int | str):
    """Attach a stream handler once and set the logging level

    :param level: Logging level, as accepted by the logging module
    """
    log = logger()
    if not log.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        log.addHandler(handler)
    log.setLevel(level)
