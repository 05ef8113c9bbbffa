"""Runs the finite-depth calibration grid.

Synopsis:

PYTHONPATH=py python tools/calibrate.py --n-samples 100000 --threads 8


Every cell samples games truncated at depth t and compares the fraction with
root value below k against the exact iterate f_k^{t+1}(0). With honest
randomness at most one of the cells should have |z| > 4; the exit status is 1
otherwise.

"""

import argparse
import itertools
import sys
import time

import pandas as pd  # type: ignore

from rpiglib import montecarlo, presets, settings, util


Z_BOUND = 4
MAX_OUTLIERS = 1

# (preset, params, k, depths)
GRID = (
    [('geometric-escape', dict(l=0.9, q=q), 1.0, (1, 2, 4, 8))
     for q in (0.3, 0.5, 0.9)] +
    [('nary-uniform', dict(n=n, q=q), k, (1, 3, 6))
     for n, q, k in itertools.product((2, 3), (0.5, 0.7), (0.05, 0.2))]
)

parser = argparse.ArgumentParser('Calibrates Monte Carlo estimates of P(v_t < k).')
parser.add_argument('--n-samples', type=int, default=settings.n_samples,
                    help='Games per cell.')
parser.add_argument('--seed', type=int, default=0,
                    help='Master seed; cell j uses seed + j.')
parser.add_argument('--threads', type=int, default=None,
                    help=f'Worker processes (default ${settings.threads_env}).')
parser.add_argument('--out', type=str, default=None,
                    help='Also write the table as CSV.')
parser.add_argument('--debug', action='store_true')


def cells():
    for name, params, k, depths in GRID:
        for t in depths:
            yield name, params, k, t


def main(args):
    logger = util.createLogger('calibrate', logfile=False, debug=args.debug)
    threads = settings.threads() if args.threads is None else args.threads
    rows = []
    t0 = time.time()
    for j, (name, params, k, t) in enumerate(cells()):
        p = presets.preset(name, **params)
        estimate = montecarlo.estimate_truncated_cdf(
            p, k, t, args.n_samples, args.seed + j, threads=threads)
        logger.info('%s %s k=%g t=%d: %.5f vs %.5f (z=%+.2f)', name, params, k,
                    t, estimate.mean, estimate.exact_target, estimate.z_score)
        rows.append(dict(preset=name, **params, k=k, t=t, samples=estimate.n,
                         mean=estimate.mean, stderr=estimate.stderr,
                         exact_target=estimate.exact_target, z=estimate.z_score))
    df = pd.DataFrame(rows)
    print(df.to_string(index=False))
    if args.out:
        df.to_csv(args.out, index=False, float_format=settings.float_format)
    outliers = int((df.z.abs() > Z_BOUND).sum())
    logger.info('%d cells, %d with |z| > %d, %.1fs', len(df), outliers, Z_BOUND,
                time.time() - t0)
    if outliers > MAX_OUTLIERS:
        logger.error('calibration failed: %d outliers', outliers)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main(parser.parse_args()))
