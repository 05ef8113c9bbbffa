"""Monte Carlo experiments checked against exact values.

Game `j` of an experiment uses seed `rng.stream_seed(master_seed, j)`. Seeds are
split into chunks of `settings.chunk_size`, every chunk returns integer
counters, and counters are summed, so results are bit-identical for any
number of worker processes.

Synopsis:

    p = presets.preset('nary-uniform', n=2, q=0.7)
    estimate = montecarlo.estimate_truncated_cdf(p, k=0.05, t=6, N=10000,
                                                 master_seed=1)
    estimate.z_score
"""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

from . import games, rng, settings, transforms, util, vgf
from .model import Player


class TooFewAcceptancesException(Exception):
    """Thrown if too few sampled games satisfy the conditioning event."""

    def __init__(self, n_accepted, required=None):
        super().__init__(f'only {n_accepted} accepted samples'
                         + (f' (need {required})' if required else ''))
        self.n_accepted = n_accepted


def _z_score(mean, stderr, exact_target):
    if exact_target is None:
        return None
    diff = mean - exact_target
    if stderr > 0:
        return diff / stderr
    return 0.0 if diff == 0 else math.copysign(math.inf, diff)


class McEstimate(NamedTuple):
    mean: float
    stderr: float
    n: int
    exact_target: Optional[float] = None
    z_score: Optional[float] = None

    @classmethod
    def bernoulli(cls, hits, n, exact_target=None):
        mean = hits / n
        stderr = math.sqrt(mean * (1 - mean) / n)
        return cls(mean, stderr, n, exact_target,
                   _z_score(mean, stderr, exact_target))

    @classmethod
    def from_sums(cls, total, total_sq, n, exact_target=None):
        """Sample mean of counts from their sum and sum of squares."""
        mean = total / n
        variance = max(0.0, total_sq / n - mean ** 2)
        if n > 1:
            variance *= n / (n - 1)
        stderr = math.sqrt(variance / n)
        return cls(mean, stderr, n, exact_target,
                   _z_score(mean, stderr, exact_target))

    def retarget(self, exact_target):
        """Same estimate scored against another target."""
        return self._replace(exact_target=exact_target,
                             z_score=_z_score(self.mean, self.stderr, exact_target))


class StarRootReport(NamedTuple):
    """Root statistics of the conditional game given {v_t ≥ k}."""
    t: int
    n_accepted: int
    activation_I: McEstimate
    mean_children_I: Optional[McEstimate]
    mean_children_II: Optional[McEstimate]
    limits: transforms.RootStats


class SimpleStrategyReport(NamedTuple):
    estimate: McEstimate
    truncated_target: float
    offspring_mean: float


def _chunks(N, master_seed, *args):
    size = settings.chunk_size
    return [(start, min(N, start + size), master_seed) + args
            for start in range(0, N, size)]


def _map_chunks(fn, tasks, threads):
    threads = settings.threads() if threads is None else threads
    if threads > 1:
        return util.parallel_map(fn, tasks, threads)
    progress = util.LogEvery()
    results = []
    for i, task in enumerate(tasks):
        results.append(fn(task))
        progress('%s: %d/%d chunks', fn.__name__, i + 1, len(tasks))
    return results


def _check_n(N):
    if N < 100:
        raise ValueError(f'N={N} < 100')


###############################################################################
# workers (module level so they pickle)
###############################################################################


def _cdf_chunk(task):
    start, stop, master_seed, p, k, t, node_budget = task
    below = 0
    for j in range(start, stop):
        seed = rng.stream_seed(master_seed, j)
        if not games.value_at_least(p, seed, t, k, node_budget=node_budget):
            below += 1
    return below


def _star_root_chunk(task):
    start, stop, master_seed, p, k, t, node_budget = task
    # accepted, root I, Σ children I, Σ children² I, Σ children II, Σ children² II
    counters = [0] * 6
    for j in range(start, stop):
        root = games.conditional_root(
            p, rng.stream_seed(master_seed, j), t, k, node_budget=node_budget)
        if root is None:
            continue
        player, n = root
        counters[0] += 1
        if player is Player.I:
            counters[1] += 1
            counters[2] += n
            counters[3] += n * n
        else:
            counters[4] += n
            counters[5] += n * n
    return counters


def _follow_chunk(task):
    start, stop, master_seed, p, k, t, node_budget = task
    wins = 0
    for j in range(start, stop):
        seed = rng.stream_seed(master_seed, j)
        if games.value_at_least(p, seed, t, k, follow=Player.II,
                                node_budget=node_budget):
            wins += 1
    return wins


###############################################################################
# experiments
###############################################################################


def estimate_truncated_cdf(p, k, t, N, master_seed, threads=None,
                           node_budget=None):
    """Fraction of N sampled games with v_t < k, against α_t = f_k^(t+1)(0)."""
    _check_n(N)
    if t < 0:
        raise ValueError(f't={t} < 0')
    tasks = _chunks(N, master_seed, p, k, t, node_budget)
    below = sum(_map_chunks(_cdf_chunk, tasks, threads))
    exact = vgf.alpha_iterates(p, k, t)[-1]
    estimate = McEstimate.bernoulli(below, N, exact)
    util.logger.info('P(v_%d < %g): %.6f ± %.6f, exact %.6f, z=%.2f',
                     t, k, estimate.mean, estimate.stderr, exact,
                     estimate.z_score)
    return estimate


def estimate_star_root(p, k, t_schedule, N, master_seed, threads=None,
                       node_budget=None, min_acceptances=None):
    """Root player and T*-children statistics of games with v_t ≥ k.

    Returns one `StarRootReport` per t in `t_schedule`. Exact targets are the
    finite-t statistics (`transforms.truncated_conditional_stats`), the limits
    are the p* statistics they converge to.
    """
    _check_n(N)
    min_acceptances = (settings.min_acceptances if min_acceptances is None
                       else min_acceptances)
    report = vgf.positivity(p, k)
    if not report.beta_positive:
        util.logger.error('P(v >= %g) = 0, nothing to condition on', k)
        raise TooFewAcceptancesException(0, min_acceptances)
    limits = transforms.conditional_distribution(p, k).root_stats()

    reports = []
    for t in t_schedule:
        tasks = _chunks(N, master_seed, p, k, t, node_budget)
        counters = [sum(column) for column in
                    zip(*_map_chunks(_star_root_chunk, tasks, threads))]
        accepted, n_I, sum_I, sumsq_I, sum_II, sumsq_II = counters
        if accepted < min_acceptances:
            raise TooFewAcceptancesException(accepted, min_acceptances)
        n_II = accepted - n_I
        target = transforms.truncated_conditional_stats(p, k, t)
        reports.append(StarRootReport(
            t=t,
            n_accepted=accepted,
            activation_I=McEstimate.bernoulli(n_I, accepted, target.activation_I),
            mean_children_I=(McEstimate.from_sums(
                sum_I, sumsq_I, n_I, target.mean_children_I) if n_I else None),
            mean_children_II=(McEstimate.from_sums(
                sum_II, sumsq_II, n_II, target.mean_children_II) if n_II else None),
            limits=limits,
        ))
        util.logger.info('t=%d: %d/%d accepted, p*(I) %.4f (t-target %.4f)',
                         t, accepted, N, reports[-1].activation_I.mean,
                         target.activation_I)
    return reports


def simple_strategy_experiment(p, t, N, master_seed, k=1.0, threads=None,
                               node_budget=None):
    """Probability that I reaches payoff ≥ k when II always takes child 1.

    That is II's simple strategy whenever every subgame value is below k.
    The games I can still win form the selection model's Galton-Watson tree:
    the estimate's exact target is that tree's survival probability, the
    truncated target its survival up to depth t.
    """
    _check_n(N)
    selection = transforms.selection_model(p)
    exact = 1.0 - vgf.smallest_fixed_point(selection, k).alpha
    if vgf.smallest_fixed_point(p, k).alpha < 1:
        util.logger.warning(
            'P(v >= %g) > 0: the simple strategy of II is not always child 1, '
            'reporting the truncated target only', k)
        exact = None
    truncated = 1.0 - vgf.alpha_iterates(selection, k, t)[-1]
    tasks = _chunks(N, master_seed, p, k, t, node_budget)
    wins = sum(_map_chunks(_follow_chunk, tasks, threads))
    estimate = McEstimate.bernoulli(wins, N, exact)
    offspring_mean = vgf.d_param(selection, k)
    util.logger.info('simple II strategy beaten in %.5f ± %.5f (t=%d, limit %s, '
                     'selection mean %g)', estimate.mean, estimate.stderr, t,
                     exact, offspring_mean)
    return SimpleStrategyReport(estimate, truncated, offspring_mean)
