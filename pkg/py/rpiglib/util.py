
import collections
import enum
import hashlib
import json
import logging
import math
import multiprocessing
import os
import sys
import time

import numpy as np  # type: ignore


FORMAT = '%(asctime)s - %(levelname)s - %(message)s'
LOGDIR = './logs'


# Will be set when `createLogger()` is called the first time.
logger: logging.Logger = logging.getLogger()


class Colorize:
    # https://stackoverflow.com/questions/4842424
    ANSI_RESET = '\033[0m'
    ANSI_MAP = {
        logging.INFO: '\033[1m',  # bold
        logging.WARNING: '\033[33m',  # yellow
        logging.ERROR: '\033[91m',  # bright red
        logging.FATAL: '\033[30;101m',  # black on bright red
    }

    def __init__(self, formatter):
        self.formatter = formatter

    def format(self, record):
        return ''.join([
            self.ANSI_MAP.get(record.levelno, self.ANSI_RESET),
            self.formatter.format(record),
            self.ANSI_RESET
        ])

    def __getattr__(self, name):
        return getattr(self.formatter, name)


def createLogger(name, stderr=True, logfile=True, colored=True, debug=True):  # noqa: N802, E501
    """Sets root logger & creates `name`.log file.

    Handlers from a previous call are replaced, so repeated CLI invocations in
    one process don't duplicate output.
    """
    global logger
    logger = logging.getLogger('')
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
    logger.setLevel(logging.DEBUG if debug else logging.INFO)
    formatter = logging.Formatter(FORMAT)
    if stderr:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(Colorize(formatter) if colored else formatter)
        handler.setLevel(logging.DEBUG)
        logger.addHandler(handler)
    if logfile:
        path = os.path.join(LOGDIR, name + '.log')
        os.makedirs(os.path.dirname(path), exist_ok=True)
        handler = logging.FileHandler(path)
        handler.setFormatter(formatter)
        handler.setLevel(logging.DEBUG)
        logger.addHandler(handler)
    return logger


def pythonize(d):
    """Transforms numpy arrays & scalars, tuples, enums to native Python."""
    if isinstance(d, dict):
        return {pythonize(k): pythonize(v) for k, v in d.items()}
    if isinstance(d, (np.ndarray, list, tuple)):
        return [pythonize(v) for v in d]
    if isinstance(d, np.floating):
        return float(d)
    if isinstance(d, (np.integer, np.bool_)):
        return d.item()
    if isinstance(d, enum.Enum):
        return d.value
    if isinstance(d, collections.abc.KeysView):
        return list(d)
    return d


def serialize(obj, indent=None):
    """Serializes `obj` to UTF8 JSON with sorted keys."""
    return json.dumps(
        pythonize(obj), indent=indent, sort_keys=True,
        allow_nan=True).encode('utf8')


def deserialize(msg):
    """Does the opposite of `serialize()`."""
    if isinstance(msg, bytes):
        msg = msg.decode('utf8')
    return json.loads(msg)


def digest(obj, n=16):
    """First `n` hex digits of the SHA-256 of `serialize(obj)`."""
    return hashlib.sha256(serialize(obj)).hexdigest()[:n]


def parse_grid(spec):
    """Parses `lo:hi:step` (or a single number) into a list of floats.

    Points are `lo + i * step` for all `i` with `lo + i * step < hi + step / 2`,
    i.e. `hi` is included when it lies on the grid.
    """
    parts = spec.split(':')
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise ValueError(f'grid must be lo:hi:step, got {spec!r}')
    lo, hi, step = (float(part) for part in parts)
    if not all(math.isfinite(x) for x in (lo, hi, step)):
        raise ValueError(f'non-finite grid {spec!r}')
    if step <= 0:
        raise ValueError(f'grid step must be positive, got {step}')
    points = []
    i = 0
    while lo + i * step < hi + step / 2:
        points.append(lo + i * step)
        i += 1
    if not points:
        raise ValueError(f'empty grid {spec!r}')
    return points


def parallel_map(fn, items, threads=1):
    """Ordered `map()`, spread over a process pool when `threads > 1`."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with multiprocessing.Pool(min(threads, len(items))) as pool:
        return pool.map(fn, items)


class LogEvery:
    """Logs at most every `dt` seconds."""

    def __init__(self, dt=5):
        self.dt = dt
        self.t0 = time.time()

    def __call__(self, msg, *args):
        if self.dt > 0 and time.time() - self.t0 > self.dt:
            self.t0 = time.time()
            logger.info(msg, *args)
