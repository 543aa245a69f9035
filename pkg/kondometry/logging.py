import logging
import pathlib

from kondometry.config import config

_configured = False


def get_logger(name: str) -> logging.Logger:
    global _configured

    if not _configured:
        level: int = config.get_value("core.loglevel")
        fmt: str = config.get_value("core.logfmt")
        logfile: str = config.get_value("core.logfile")

        if logfile:
            filename = pathlib.Path(logfile)
            # ensure the logfile directory actually exists
            filename.parent.mkdir(parents=True, exist_ok=True)
            logging.basicConfig(filename=filename, format=fmt, level=level)
        else:
            logging.basicConfig(format=fmt, level=level)

        _configured = True

    return logging.getLogger(name=name)


def set_verbose(verbose: bool):
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
