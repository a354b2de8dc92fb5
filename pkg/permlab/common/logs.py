'''
Logging setup for the command line runner.

Library modules only call logging.getLogger('permlab.<module>'); handlers are
installed here once per process.
'''

import logging
import sys
from pathlib import Path

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def configure_logging(level: str = "INFO", log_file: str | None = None) -> logging.Logger:
    '''
    Configure root logging with a stderr stream handler and an optional file handler.
    stdout is reserved for JSON reports.
    '''
    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
    return logging.getLogger('permlab')
