"""Defaults shared by the numerics, the simulator and the CLI.

Every function taking one of these as a keyword reads the module attribute at
call time, so tests and the CLI can override them per call.
"""
import logging
import os

version = '0.3.0'

# model-core
weight_tol = 1e-12

# vgf-engine
step_tol = 1e-13
resid_tol = 1e-11
max_iter = 200000
bisect_hi = 1 - 1e-15
esssup_tol = 1e-9
esssup_max_iter = 200

# game-sim
node_budget = 5_000_000

# mc-harness
n_samples = 100_000
min_acceptances = 500
chunk_size = 2048

# cli
float_format = '%.17g'
threads_env = 'RPIG_THREADS'


def threads():
    """Worker count from `RPIG_THREADS` (default 1)."""
    value = os.environ.get(threads_env)
    if not value:
        return 1
    try:
        n = int(value)
    except ValueError:
        n = 0
    if n < 1:
        logging.getLogger().warning('ignoring %s=%r', threads_env, value)
        return 1
    return n
