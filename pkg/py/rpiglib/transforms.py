"""Derived laws: the k-conditional law p* and the avoidance law p'.

p* is the law of the game restricted to the nodes whose value is at least k,
given that the root value is at least k. It generally leaves the block family
(thinned geometric laws aren't geometric), so it is exposed through its
generating functions, moments and, for finite bases, its exact pmf.

p' zeroes the capacity of every node of player II with two or more children.
It stays a block model.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Optional

import scipy.stats  # type: ignore

from . import model, util, vgf
from .model import Player


class DegenerateConditioningException(Exception):
    """Thrown if conditioning on {v ≥ k} when P(v ≥ k) = 0.

    `report` is the `vgf.PositivityReport` certifying β(k) = 0.
    """

    def __init__(self, k, report):
        super().__init__(
            f'P(v >= {k}) = 0: p(γ<k)={report.cond_gamma_lt_k!r}, '
            f'p(γ≥k, ξ=0)={report.cond_leaf_mass!r}, d(k)={report.d_of_k!r}')
        self.k = k
        self.report = report


class UnsupportedBaseException(Exception):
    """Thrown if an exact pmf is requested for an unbounded offspring law."""
    pass


class RootStats(NamedTuple):
    """Root player and children statistics of a conditional game."""
    activation_I: Optional[float]
    mean_children_I: Optional[float]
    mean_children_II: Optional[float]


###############################################################################
# conditional law
###############################################################################


class StarDistribution:

    def __init__(self, base, k, alpha):
        self.base = base
        self.k = k
        self.alpha = alpha
        self.beta = 1.0 - alpha
        if not self.beta > 0:
            raise DegenerateConditioningException(k, vgf.positivity(base, k))
        self._activation = {
            player: float(self.gen_fun(player, k, 1.0)) for player in Player}
        total = sum(self._activation.values())
        assert abs(total - 1) <= 1e-10, f'p* activation sums to {total!r}'

    def __repr__(self):
        return (f'StarDistribution(k={self.k!r}, alpha={self.alpha!r}, '
                f'base={self.base!r})')

    def level(self, c):
        """Capacities under p* are at least k; levels below k act as k."""
        return max(c, self.k)

    def gen_fun(self, player, c, x):
        """G*_i(c, x); `x` may be an array."""
        c = self.level(c)
        alpha, beta, base = self.alpha, self.beta, self.base
        if player is Player.I:
            return (vgf.gen_fun(base, player, c, alpha + beta * x)
                    + vgf.gen_fun(base, player, c, 0.0)
                    - vgf.gen_fun(base, player, c, alpha)) / beta
        return vgf.gen_fun(base, player, c, beta * x) / beta

    def activation(self, player):
        """p*(ι = i) = q_i β_i / β."""
        return self._activation[player]

    def restricted_mean(self, player):
        """E_{p*}(1{ι=i} ξ)."""
        if player is Player.I:
            return self.base.block_sum(player, self.k, 'internal_mean')
        return float(self.base.block_sum(
            player, self.k, 'internal_pgf_derivative', self.beta))

    def conditional_mean(self, player):
        """E_{p*}(ξ | ι = i)."""
        activation = self.activation(player)
        if activation == 0:
            raise vgf.UndefinedConditionalException(player)
        return self.restricted_mean(player) / activation

    def root_stats(self):
        means = {}
        for player in Player:
            means[player] = (self.conditional_mean(player)
                             if self.activation(player) > 0 else None)
        return RootStats(self.activation(Player.I),
                         means[Player.I], means[Player.II])


def conditional_distribution(p, k):
    """The law p* of the k-conditional game."""
    result = vgf.smallest_fixed_point(p, k)
    if result.alpha >= 1:
        raise DegenerateConditioningException(k, vgf.positivity(p, k))
    return StarDistribution(p, k, result.alpha)


def star_vgf(star, c, x):
    """f*(c, x) = (f(c, βx + α) - α) / β."""
    c = star.level(c)
    return (vgf.vgf(star.base, c, star.beta * x + star.alpha)
            - star.alpha) / star.beta


def assembled_vgf(star, c, x):
    """The value generating function built from G*_I and G*_II."""
    return (1.0 - star.gen_fun(Player.I, c, 0.0) - star.gen_fun(Player.I, c, 1.0)
            + star.gen_fun(Player.I, c, x) - star.gen_fun(Player.II, c, 1.0 - x))


def star_offspring_mean(star):
    """E_{p*}(ξ); never below d(k)."""
    mean = sum(star.restricted_mean(player) for player in Player)
    d = vgf.d_param(star.base, star.k)
    assert d <= mean + 1e-12, f'd(k)={d!r} > E_p*(ξ)={mean!r}'
    return mean


def _base_pmf(base, player, c, m):
    """p_i(c, m) = p(ι=i, γ≥c, ξ=m)."""
    total = 0.0
    for block in base.blocks:
        if block.player is not player:
            continue
        law = block.capacity_leaf if m == 0 else block.capacity_internal
        total += block.weight * law.survival(c) * block.offspring.pmf(m)
    return total


def support_bound(base, player, n_max_base):
    bound = 0
    for block in base.blocks:
        if block.player is not player:
            continue
        top = block.offspring.max_support()
        if top is None:
            raise UnsupportedBaseException(
                f'{block.offspring!r} has unbounded support')
        if n_max_base is not None and top > n_max_base:
            raise UnsupportedBaseException(
                f'{block.offspring!r} exceeds n_max_base={n_max_base}')
        bound = max(bound, top)
    return bound


def star_pmf(star, player, c, n, n_max_base=None):
    """p*_i(c, n) = p*(ι=i, γ≥c, ξ=n) by binomial thinning of the base."""
    c = star.level(c)
    bound = support_bound(star.base, player, n_max_base)
    beta = star.beta
    if n == 0:
        return _base_pmf(star.base, player, c, 0) / beta
    if n > bound:
        return 0.0
    if player is Player.II:
        return _base_pmf(star.base, player, c, n) * beta ** (n - 1)
    return math.fsum(
        _base_pmf(star.base, player, c, m) * scipy.stats.binom.pmf(n, m, beta)
        for m in range(n, bound + 1)) / beta


def star_offspring_pmf(star, n, n_max_base=None):
    """p*(ξ = n) over both players."""
    return sum(star_pmf(star, player, star.k, n, n_max_base)
               for player in Player if star.base.q(player) > 0)


def truncated_conditional_stats(p, k, t):
    """Exact root statistics of the conditional game given {v_t ≥ k}.

    The number of root children counts the children whose truncated value
    is at least k. Converges to `conditional_distribution(p, k).root_stats()`.
    """
    mass_I, mass_II = vgf.truncated_split(p, k, t)
    total = mass_I + mass_II
    if not total > 0:
        return RootStats(None, None, None)
    if t == 0:
        return RootStats(mass_I / total,
                         0.0 if mass_I > 0 else None,
                         0.0 if mass_II > 0 else None)
    beta = 1.0 - vgf.alpha_iterates(p, k, t - 1)[-1]
    mean_I = mean_II = None
    if mass_I > 0:
        mean_I = beta * p.block_sum(Player.I, k, 'internal_mean') / mass_I
    if mass_II > 0:
        mean_II = beta * float(p.block_sum(
            Player.II, k, 'internal_pgf_derivative', beta)) / mass_II
    return RootStats(mass_I / total, mean_I, mean_II)


###############################################################################
# avoidance law
###############################################################################


class AvoidanceDistribution(model.PrimitiveDistribution):
    """Block model p' plus the `base` it was derived from."""

    def __init__(self, blocks, base):
        super().__init__(blocks)
        self.base = base


def split_offspring(law):
    """[(mass, law | ξ ≤ 1), (mass, law | ξ ≥ 2)], omitting empty pieces."""
    if isinstance(law, model.FixedOffspring):
        pieces = [(1.0, law, law.n <= 1)]
    elif isinstance(law, model.GeometricOffspring):
        l, s = law.l, law.shift
        if s >= 2:
            pieces = [(1.0, law, False)]
        elif s == 1:
            pieces = [(1 - l, model.FixedOffspring(1), True),
                      (l, model.GeometricOffspring(l, 2), False)]
        else:
            pieces = [(1 - l ** 2,
                       model.FiniteOffspring((1 / (1 + l), l / (1 + l))), True),
                      (l ** 2, model.GeometricOffspring(l, 2), False)]
    elif isinstance(law, model.FiniteOffspring):
        low = math.fsum(law.probs[:2])
        high = math.fsum(law.probs[2:])
        pieces = []
        if low > 0:
            pieces.append((low, model.FiniteOffspring(
                tuple(p / low for p in law.probs[:2])), True))
        if high > 0:
            pieces.append((high, model.FiniteOffspring(
                (0.0, 0.0) + tuple(p / high for p in law.probs[2:])), False))
    else:
        raise UnsupportedBaseException(f'cannot split {law!r}')
    return [(mass, piece, low) for mass, piece, low in pieces if mass > 0]


def avoidance_distribution(p):
    """p': II-nodes with at least two children get capacity 0."""
    zero = model.PointCapacity(0.0)
    blocks = []
    for block in p.blocks:
        if block.player is Player.I:
            blocks.append(block)
            continue
        for mass, offspring, low in split_offspring(block.offspring):
            weight = block.weight * mass
            if weight <= 0:
                continue
            blocks.append(model.Block(
                weight, block.player, offspring, block.capacity_leaf,
                block.capacity_internal if low else zero))
    util.logger.debug('avoidance model has %d blocks', len(blocks))
    return AvoidanceDistribution(blocks, p)


def selection_model(p):
    """Single-player law of the tree left when II always takes child 1.

    II-nodes keep one child if they have any; capacities are unchanged.
    """
    blocks = []
    for block in p.blocks:
        if block.player is Player.I:
            blocks.append(block)
            continue
        pmf0 = block.offspring.pmf(0)
        if pmf0 == 0:
            offspring = model.FixedOffspring(1)
        elif pmf0 == 1:
            offspring = model.FixedOffspring(0)
        else:
            offspring = model.FiniteOffspring((pmf0, 1 - pmf0))
        blocks.append(block._replace(player=Player.I, offspring=offspring))
    return model.PrimitiveDistribution(blocks)
