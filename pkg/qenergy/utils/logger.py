import logging
import sys

logger = logging.getLogger('qenergy')

VERBOSE = 15  # between DEBUG=10 and INFO=20


class InfoFilter(logging.Filter):
    def filter(self, rec):
        return rec.levelno in (logging.DEBUG, VERBOSE, logging.INFO)


def init_logger():
    logging.addLevelName(VERBOSE, "VERBOSE")

    def info_verbose(self, message, *args, **kws):
        if self.isEnabledFor(VERBOSE):
            self.log(VERBOSE, message, *args, **kws)

    logging.Logger.verbose = info_verbose


def setup_logging(loglevel, info_stream=None):
    '''Write info, verbose and debug messages to `info_stream` (default:
    stdout), warnings and errors to stderr.

    The scripts pass stderr as `info_stream` when CSV rows go to stdout.
    '''
    if info_stream is None:
        info_stream = sys.stdout
    logger.setLevel(loglevel)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    out_handler = logging.StreamHandler(stream=info_stream)
    out_handler.setLevel(loglevel)
    out_handler.addFilter(InfoFilter())

    err_handler = logging.StreamHandler(stream=sys.stderr)
    err_handler.setLevel(logging.WARNING)

    logger.addHandler(out_handler)
    logger.addHandler(err_handler)

    return logger


# library modules call logger.verbose() even when no script set things up
init_logger()
