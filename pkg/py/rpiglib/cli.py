"""Command line interface.

Usage:

python -m rpiglib.cli analyze --preset nary-uniform --n 2 --q 0.7 \
    --k-grid 0:0.3:0.01 --out binary.csv
python -m rpiglib.cli sweep-q --preset geometric-escape --l 0.9 --k 1 \
    --q-grid 0:1:0.01 --out escape.csv
python -m rpiglib.cli simulate --preset geometric-escape --l 0.9 --q 0.5 \
    --k 1 --t 8 --n-samples 100000 --seed 1 --out sim.csv
python -m rpiglib.cli transform --preset nary-uniform --n 3 --q 0.7 \
    --conditional 0.05 --out star.json
python -m rpiglib.cli rerun --manifest sim.csv.manifest.json --check

Every file written with --out gets a `<out>.manifest.json` next to it;
`rerun` replays a manifest and `--check` compares the output bytes.

Exit codes: 0 ok, 1 rerun mismatch, 2 usage, 3 model error, 4 numerical
failure, 5 degenerate conditioning.
"""
import argparse
import inspect
import os
import shutil
import sys
import tempfile

import numpy as np  # type: ignore
import pandas as pd  # type: ignore

from . import games, model, montecarlo, presets, settings, transforms, util, vgf
from .model import Player


EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_MODEL = 3
EXIT_NUMERIC = 4
EXIT_DEGENERATE = 5

EXIT_CODES = (
    (model.InvalidModelException, EXIT_MODEL),
    (presets.InvalidPresetException, EXIT_MODEL),
    (vgf.NotApplicableException, EXIT_MODEL),
    (vgf.HypothesisFailedException, EXIT_MODEL),
    (vgf.NoConvergenceException, EXIT_NUMERIC),
    (games.BudgetExceededException, EXIT_NUMERIC),
    (transforms.DegenerateConditioningException, EXIT_DEGENERATE),
    (montecarlo.TooFewAcceptancesException, EXIT_DEGENERATE),
    (ValueError, EXIT_USAGE),
    (OSError, EXIT_USAGE),
)

EXPERIMENTS = ('cdf', 'star-root', 'simple-strategy')


class UsageException(Exception):
    """Thrown if the arguments are inconsistent beyond what argparse checks."""
    pass


###############################################################################
# arguments
###############################################################################


def _add_common(parser):
    group = parser.add_argument_group('model')
    group.add_argument('--preset', type=str, default=None,
                       choices=sorted(presets.presets),
                       help='Reference model to use.')
    group.add_argument('--model-file', type=str, default=None,
                       help='Model JSON file (instead of --preset).')
    group.add_argument('--l', type=float, default=None,
                       help='Geometric offspring parameter.')
    group.add_argument('--q', type=float, default=None,
                       help='Activation probability of player I.')
    group.add_argument('--n', type=int, default=None,
                       help='Number of children of n-ary presets.')
    group.add_argument('--offspring', type=str, default=None,
                       help='Offspring law as JSON, e.g. \'{"kind": "fixed", "n": 2}\'.')
    parser.add_argument('--out', type=str, default=None,
                        help='Output file; stdout if missing.')
    parser.add_argument('--tol-step', type=float, default=None,
                        help=f'Fixed point step tolerance ({settings.step_tol}).')
    parser.add_argument('--tol-resid', type=float, default=None,
                        help=f'Fixed point residual tolerance ({settings.resid_tol}).')
    parser.add_argument('--threads', type=int, default=None,
                        help=f'Worker processes (default ${settings.threads_env}).')
    parser.add_argument('--debug', action='store_true')
    parser.add_argument('--logfile', action='store_true',
                        help=f'Also log to {util.LOGDIR}/rpig.log')


def make_parser():
    parser = argparse.ArgumentParser(
        prog='rpiglib', description='Random perfect information games.')
    parser.add_argument('--version', action='version', version=settings.version)
    subparsers = parser.add_subparsers(dest='command', required=True)

    analyze = subparsers.add_parser(
        'analyze', help='Value distribution on a grid of levels.')
    _add_common(analyze)
    analyze.add_argument('--k-grid', type=str, required=True,
                         help='Levels as lo:hi:step or a single value.')

    sweep = subparsers.add_parser(
        'sweep-q', help='Value distribution along the activation probability.')
    _add_common(sweep)
    sweep.add_argument('--k', type=float, required=True)
    sweep.add_argument('--q-grid', type=str, required=True,
                       help='Activation probabilities as lo:hi:step.')

    simulate = subparsers.add_parser(
        'simulate', help='Monte Carlo experiments against exact values.')
    _add_common(simulate)
    simulate.add_argument('--k', type=float, default=1.0)
    simulate.add_argument('--t', type=int, nargs='+', default=[8],
                          help='Truncation depths.')
    simulate.add_argument('--n-samples', type=int, default=settings.n_samples)
    simulate.add_argument('--seed', type=int, default=0)
    simulate.add_argument('--experiment', type=str, default='cdf',
                          choices=EXPERIMENTS)

    transform = subparsers.add_parser(
        'transform', help='Conditional report or avoidance model.')
    _add_common(transform)
    which = transform.add_mutually_exclusive_group(required=True)
    which.add_argument('--conditional', type=float, default=None, metavar='K',
                       help='Report on the law of the game given v >= K.')
    which.add_argument('--avoidance', action='store_true',
                       help='Write the avoidance model.')
    transform.add_argument('--n-max', type=int, default=None,
                           help='Largest n in the conditional pmf table.')
    transform.add_argument('--c', type=float, nargs='*', default=[],
                           help='Levels for conditional survival queries.')

    rerun = subparsers.add_parser('rerun', help='Replays a run manifest.')
    rerun.add_argument('--manifest', type=str, required=True)
    rerun.add_argument('--check', action='store_true',
                       help='Run into a temporary directory and compare bytes.')
    rerun.add_argument('--debug', action='store_true')
    return parser


def load_model(args, default_q=None):
    """Model from `--model-file` or `--preset` and its parameters."""
    if bool(args.preset) == bool(args.model_file):
        raise UsageException('give exactly one of --preset and --model-file')
    if args.model_file:
        return model.load_model(args.model_file)
    params = {name: getattr(args, name) for name in ('l', 'q', 'n')
              if getattr(args, name) is not None}
    if args.offspring is not None:
        try:
            params['offspring'] = model.law_from_json(
                util.deserialize(args.offspring))
        except ValueError as e:
            raise UsageException(f'--offspring: {e}')
    accepted = inspect.signature(presets.presets[args.preset]).parameters
    if 'q' in accepted and 'q' not in params and default_q is not None:
        params['q'] = default_q
    return presets.preset(args.preset, **params)


###############################################################################
# output
###############################################################################


def manifest_path(out):
    return out + '.manifest.json'


def write_output(args, argv, p, text, extra=None):
    """Writes `text` to `--out` plus its manifest, or to stdout."""
    if not args.out:
        sys.stdout.write(text)
        return
    manifest = {
        'argv': _strip_out(argv),
        'output': os.path.basename(args.out),
        'model': ({'file': args.model_file} if args.model_file else
                  {'preset': args.preset,
                   'params': {name: getattr(args, name)
                              for name in ('l', 'q', 'n', 'offspring')
                              if getattr(args, name) is not None}}),
        'model_hash': model.model_hash(p),
        'tolerances': {'step': settings.step_tol, 'resid': settings.resid_tol},
        'version': settings.version,
    }
    manifest.update(extra or {})
    with open(args.out, 'w') as f:
        f.write(text)
    with open(manifest_path(args.out), 'wb') as f:
        f.write(util.serialize(manifest, indent=2))
    util.logger.info('wrote %s', args.out)


def _strip_out(argv):
    stripped = []
    skip = False
    for arg in argv:
        if skip:
            skip = False
        elif arg == '--out':
            skip = True
        elif not arg.startswith('--out='):
            stripped.append(arg)
    return stripped


def csv_text(args, df, footer=()):
    """CSV with a leading manifest comment and trailing `# name: value` lines."""
    lines = []
    if args.out:
        lines.append(f'# manifest: {os.path.basename(manifest_path(args.out))}\n')
    lines.append(df.to_csv(index=False, float_format=settings.float_format,
                           na_rep='nan'))
    for name, value in footer:
        lines.append(f'# {name}: {settings.float_format % value}\n')
    return ''.join(lines)


def _nan(x):
    return np.nan if x is None else x


###############################################################################
# commands
###############################################################################


def vgf_row(p, k):
    """One row of the value distribution table at level `k`."""
    if k <= 0:
        # Capacities are nonnegative: P(v < k) = 0.
        result = vgf.FixedPointResult(0.0, 0, 0.0, 'trivial')
        positive, q_c = True, np.nan
    else:
        result = vgf.smallest_fixed_point(p, k)
        positive = vgf.positivity(p, k).beta_positive
        q_c = vgf.critical_activation(p, k)
    split = vgf.conditional_split(p, k, result.alpha)
    return {
        'k': k, 'q': p.q(Player.I), 'alpha': result.alpha, 'beta': result.beta,
        'alpha_I': _nan(split.alpha_I), 'alpha_II': _nan(split.alpha_II),
        'beta_I': _nan(split.beta_I), 'beta_II': _nan(split.beta_II),
        'd': vgf.d_param(p, k), 'q_c': q_c, 'method': result.method,
        'iterations': result.iterations, 'residual': result.residual,
        'beta_positive': int(positive),
    }


def _analyze_row(task):
    return vgf_row(*task)


def cmd_analyze(args, argv):
    p = load_model(args)
    grid = util.parse_grid(args.k_grid)
    rows = util.parallel_map(_analyze_row, [(p, k) for k in grid], _threads(args))
    esssup = vgf.essential_supremum(p)
    text = csv_text(args, pd.DataFrame(rows), [('esssup', esssup)])
    write_output(args, argv, p, text, {'grid': {'k': grid}})
    return EXIT_OK


def _sweep_row(task):
    family, k, q = task
    return vgf_row(family.with_activation(q), k)


def cmd_sweep_q(args, argv):
    family = load_model(args, default_q=1.0)
    if not model.validate(family).is_activation_independent:
        raise vgf.NotApplicableException(
            'sweep-q needs an activation-independent model')
    grid = util.parse_grid(args.q_grid)
    for q in grid:
        if not 0 <= q <= 1:
            raise ValueError(f'q={q} not in [0, 1]')
    rows = util.parallel_map(
        _sweep_row, [(family, args.k, q) for q in grid], _threads(args))
    q_c = vgf.critical_activation(family, args.k)
    text = csv_text(args, pd.DataFrame(rows), [('q_c', q_c)])
    write_output(args, argv, family, text, {'grid': {'q': grid}})
    return EXIT_OK


def _model_columns(args):
    """Preset name (or model file name) and its parameters, for CSV rows."""
    if args.model_file:
        return {'preset': os.path.basename(args.model_file)}
    columns = {'preset': args.preset}
    columns.update({name: getattr(args, name) for name in ('l', 'q', 'n')
                    if getattr(args, name) is not None})
    return columns


def _estimate_row(experiment, statistic, k, t, N, estimate, limit):
    return {
        'experiment': experiment, 'statistic': statistic, 'k': k, 't': t,
        'N': N, 'samples': estimate.n, 'mean': estimate.mean,
        'stderr': estimate.stderr, 'exact_target': _nan(estimate.exact_target),
        'z': _nan(estimate.z_score), 'limit': _nan(limit),
    }


def cmd_simulate(args, argv):
    p = load_model(args)
    k, N, seed = args.k, args.n_samples, args.seed
    threads = _threads(args)
    rows, footer = [], []
    if args.experiment == 'cdf':
        limit = vgf.smallest_fixed_point(p, k).alpha
        for t in args.t:
            estimate = montecarlo.estimate_truncated_cdf(
                p, k, t, N, seed, threads=threads)
            rows.append(_estimate_row('cdf', 'P(v_t<k)', k, t, N, estimate, limit))
    elif args.experiment == 'star-root':
        for report in montecarlo.estimate_star_root(
                p, k, args.t, N, seed, threads=threads):
            for statistic, estimate, limit in (
                    ('activation_I', report.activation_I,
                     report.limits.activation_I),
                    ('mean_children_I', report.mean_children_I,
                     report.limits.mean_children_I),
                    ('mean_children_II', report.mean_children_II,
                     report.limits.mean_children_II)):
                if estimate is not None:
                    rows.append(_estimate_row('star-root', statistic, k,
                                              report.t, N, estimate, limit))
    else:
        for t in args.t:
            report = montecarlo.simple_strategy_experiment(
                p, t, N, seed, k=k, threads=threads)
            estimate = report.estimate
            rows.append(_estimate_row(
                'simple-strategy', 'P(I wins)', k, t, N,
                estimate.retarget(report.truncated_target),
                estimate.exact_target))
        footer.append(('selection_mean', report.offspring_mean))
    df = pd.DataFrame(rows)
    for i, (name, value) in enumerate(_model_columns(args).items()):
        df.insert(1 + i, name, value)
    text = csv_text(args, df, footer)
    write_output(args, argv, p, text, {'master_seed': seed,
                                       'grid': {'t': list(args.t)}})
    return EXIT_OK


def conditional_report(p, k, n_max=None, levels=()):
    """JSON-ready summary of the law p* of the game given v ≥ k."""
    star = transforms.conditional_distribution(p, k)
    report = {
        'k': k,
        'alpha': star.alpha,
        'beta': star.beta,
        'activation': {player.value: star.activation(player) for player in Player},
        'conditional_mean': {
            player.value: (star.conditional_mean(player)
                           if star.activation(player) > 0 else None)
            for player in Player},
        'offspring_mean': transforms.star_offspring_mean(star),
        'd': vgf.d_param(p, k),
        'survival': [
            {'c': c, 'p': float(star.gen_fun(Player.I, c, 1.0)
                                + star.gen_fun(Player.II, c, 1.0))}
            for c in levels],
        'vgf': [[x, float(transforms.star_vgf(star, k, x))]
                for x in np.linspace(0, 1, 11).tolist()],
    }
    try:
        bound = max(transforms.support_bound(p, player, None)
                    for player in Player if p.q(player) > 0)
        if n_max is not None:
            bound = min(bound, n_max)
        report['pmf'] = [[n, transforms.star_offspring_pmf(star, n)]
                         for n in range(bound + 1)]
    except transforms.UnsupportedBaseException as e:
        util.logger.info('no pmf table: %s', e)
        report['pmf'] = None
    return report


def cmd_transform(args, argv):
    p = load_model(args)
    if args.avoidance:
        derived = transforms.avoidance_distribution(p)
        text = util.serialize(derived.to_json(), indent=2).decode('utf8') + '\n'
        write_output(args, argv, p, text,
                     {'derived_model_hash': model.model_hash(derived)})
        return EXIT_OK
    report = conditional_report(p, args.conditional, args.n_max, args.c)
    text = util.serialize(report, indent=2).decode('utf8') + '\n'
    write_output(args, argv, p, text)
    return EXIT_OK


def cmd_rerun(args, argv):
    with open(args.manifest, 'rb') as f:
        manifest = util.deserialize(f.read())
    directory = os.path.dirname(os.path.abspath(args.manifest))
    recorded = os.path.join(directory, manifest['output'])
    if not args.check:
        return main(manifest['argv'] + ['--out', recorded])
    tmp = tempfile.mkdtemp(prefix='rpig_rerun_')
    try:
        replayed = os.path.join(tmp, manifest['output'])
        code = main(manifest['argv'] + ['--out', replayed])
        if code != EXIT_OK:
            return code
        with open(recorded, 'rb') as f1, open(replayed, 'rb') as f2:
            same = f1.read() == f2.read()
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    if not same:
        util.logger.error('%s differs from the replayed output', recorded)
        return EXIT_MISMATCH
    util.logger.info('%s reproduced', recorded)
    return EXIT_OK


COMMANDS = {
    'analyze': cmd_analyze,
    'sweep-q': cmd_sweep_q,
    'simulate': cmd_simulate,
    'transform': cmd_transform,
    'rerun': cmd_rerun,
}


def _threads(args):
    return settings.threads() if args.threads is None else args.threads


def main(argv=None):
    """Runs the command in `argv` and returns the exit code."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = make_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    util.createLogger('rpig', logfile=getattr(args, 'logfile', False),
                      debug=args.debug)

    saved = settings.step_tol, settings.resid_tol
    if getattr(args, 'tol_step', None) is not None:
        settings.step_tol = args.tol_step
    if getattr(args, 'tol_resid', None) is not None:
        settings.resid_tol = args.tol_resid
    try:
        return COMMANDS[args.command](args, argv)
    except UsageException as e:
        util.logger.error('%s', e)
        return EXIT_USAGE
    except transforms.DegenerateConditioningException as e:
        util.logger.error('degenerate conditioning at k=%g: p(γ<k)=%r, '
                          'p(γ≥k, ξ=0)=%r, d(k)=%r', e.k,
                          e.report.cond_gamma_lt_k, e.report.cond_leaf_mass,
                          e.report.d_of_k)
        return EXIT_DEGENERATE
    except tuple(cls for cls, _ in EXIT_CODES) as e:
        code = next(code for cls, code in EXIT_CODES if isinstance(e, cls))
        util.logger.error('%s: %s', type(e).__name__, e)
        return code
    finally:
        settings.step_tol, settings.resid_tol = saved


if __name__ == '__main__':
    sys.exit(main())
