"""Value generating function and the exact value distribution.

For a model `p` and a level `k`, the value generating function `f_k` maps the
probability that a child's value is below `k` to the same probability for its
parent. Its iterates from 0 are the truncated-game CDFs, its smallest fixed
point is P(v < k).

Synopsis:

    result = vgf.smallest_fixed_point(p, k=1.0)
    result.alpha, result.method
    vgf.positivity(p, 1.0).beta_positive
    vgf.essential_supremum(p)
"""
from __future__ import annotations

import math
from typing import List, NamedTuple, Optional, Tuple

import scipy.optimize  # type: ignore

from . import model, settings, util
from .model import Player


class NoConvergenceException(Exception):
    """Thrown if the fixed point can't be located within `max_iter` steps."""

    def __init__(self, max_iter, bracket):
        super().__init__(
            f'no convergence after {max_iter} iterations, bracket {bracket}')
        self.max_iter = max_iter
        self.bracket = bracket


class UndefinedConditionalException(Exception):
    """Thrown if conditioning on a player that is never active."""

    def __init__(self, player):
        super().__init__(f'q_{player.value} = 0')
        self.player = player


class NotApplicableException(Exception):
    """Thrown if a model doesn't satisfy the hypotheses of a computation."""
    pass


class HypothesisFailedException(Exception):
    """Thrown if the capacity law has an atom at k or no mass below it."""
    pass


class FixedPointResult(NamedTuple):
    alpha: float
    iterations: int
    residual: float
    method: str
    bracket: Optional[Tuple[float, float]] = None

    @property
    def beta(self):
        return 1.0 - self.alpha


class PositivityReport(NamedTuple):
    beta_positive: bool
    cond_gamma_lt_k: float
    cond_leaf_mass: float
    d_of_k: float


class ConditionalSplit(NamedTuple):
    """P(v < k | root player) and complements; `None` for inactive players."""
    alpha_I: Optional[float]
    alpha_II: Optional[float]
    beta_I: Optional[float]
    beta_II: Optional[float]

    def alpha_of(self, player):
        alpha = self.alpha_I if player is Player.I else self.alpha_II
        if alpha is None:
            raise UndefinedConditionalException(player)
        return alpha

    def beta_of(self, player):
        return 1.0 - self.alpha_of(player)


class AsymptoticReport(NamedTuple):
    case: str
    limit: float
    rho_I: float
    rho_II: float


CONSTANT = 'Constant'
EVENTUALLY_INCREASING = 'EventuallyIncreasing'
EVENTUALLY_DECREASING = 'EventuallyDecreasing'


###############################################################################
# generating functions
###############################################################################


def gen_fun(p, player, k, x):
    """G_i(k, x) = E(1{ι=i, γ≥k} x^ξ); `x` may be an array."""
    return (p.block_sum(player, k, 'leaf')
            + p.block_sum(player, k, 'internal_pgf', x))


def vgf(p, k, x):
    """f_k(x) = 1 - G_I(k,0) - G_I(k,1) + G_I(k,x) - G_II(k,1-x)."""
    return (1.0 - gen_fun(p, Player.I, k, 0.0) - gen_fun(p, Player.I, k, 1.0)
            + gen_fun(p, Player.I, k, x) - gen_fun(p, Player.II, k, 1.0 - x))


def d_param(p, k):
    """d(k) = E(1{I, γ≥k} ξ) + p(II, γ≥k, ξ=1); `math.inf` if divergent."""
    return (p.block_sum(Player.I, k, 'internal_mean')
            + p.block_sum(Player.II, k, 'internal_at_1'))


def alpha_iterates(p, k, T):
    """[α_0, ..., α_T] with α_t = f_k^(t+1)(0) = P(v_t < k)."""
    if T < 0:
        raise ValueError(f'T={T} < 0')
    alphas = [float(vgf(p, k, 0.0))]
    for _ in range(T):
        alphas.append(float(vgf(p, k, alphas[-1])))
    for a1, a2 in zip(alphas, alphas[1:]):
        assert a2 >= a1 - 1e-12, f'iterates decrease: {a1!r} -> {a2!r}'
    return alphas


###############################################################################
# value distribution
###############################################################################


def positivity(p, k):
    """Decides whether P(v ≥ k) > 0 from the model alone."""
    if k <= 0:
        raise ValueError(f'k={k} must be positive')
    below = p.prob_capacity_below(k)
    leaf_mass = p.leaf_mass_at_least(k)
    d = d_param(p, k)
    return PositivityReport(
        beta_positive=not (below > 0 and leaf_mass == 0 and d <= 1),
        cond_gamma_lt_k=below,
        cond_leaf_mass=leaf_mass,
        d_of_k=d,
    )


def smallest_fixed_point(p, k, step_tol=None, resid_tol=None, max_iter=None):
    """α(k) = P(v < k) as the smallest fixed point of f_k.

    Iterates f_k from 0 (the iterates increase to the smallest fixed point)
    and falls back to bisection on f_k(x) - x when the iteration stalls.
    """
    step_tol = settings.step_tol if step_tol is None else step_tol
    resid_tol = settings.resid_tol if resid_tol is None else resid_tol
    max_iter = settings.max_iter if max_iter is None else max_iter

    report = positivity(p, k)
    if not report.beta_positive:
        assert abs(vgf(p, k, 1.0) - 1.0) <= 1e-12, 'f_k(1) != 1 with β = 0'
        return FixedPointResult(1.0, 0, 0.0, 'shortcut_one')

    x = 0.0
    iterations = 0
    converged = False
    while iterations < max_iter:
        y = float(vgf(p, k, x))
        iterations += 1
        if abs(y - x) < step_tol:
            x = max(x, y)
            converged = True
            break
        x = y
    residual = abs(float(vgf(p, k, x)) - x)
    if converged and residual <= resid_tol:
        util.logger.debug('alpha(%g) = %.17g after %d iterations',
                          k, x, iterations)
        return FixedPointResult(x, iterations, residual, 'iteration')

    util.logger.warning('alpha(%g): iteration stalled at %.17g (residual %g), '
                        'bisecting', k, x, residual)

    def g(z):
        return float(vgf(p, k, z)) - z

    lo = x
    if g(lo) < 0:
        # rounding overshoot
        lo = max(0.0, lo - 1e-9)
    hi = _upper_bracket(g, lo)
    if g(lo) < 0 or hi is None:
        raise NoConvergenceException(max_iter, (lo, 1.0))
    if g(lo) == 0:
        alpha = lo
    else:
        alpha = scipy.optimize.bisect(g, lo, hi, xtol=1e-16, maxiter=200)
    residual = abs(g(alpha))
    if residual > resid_tol or not _no_smaller_fixed_point(g, alpha):
        raise NoConvergenceException(max_iter, (lo, hi))
    return FixedPointResult(alpha, iterations, residual,
                            'iteration_plus_bisection', (lo, hi))


def _upper_bracket(g, lo):
    """Smallest 1 - 2^-j above `lo` with g strictly negative, or None.

    f_k(1) = 1, so g rounds to 0 close to 1 even when the smallest fixed point
    is well below it; such points never close the bracket.
    """
    for j in range(1, 53):
        hi = 1.0 - 2.0 ** -j
        if hi > settings.bisect_hi:
            break
        if hi > lo and g(hi) < 0:
            return hi
    return None


def _no_smaller_fixed_point(g, alpha):
    """Spot check that g > 0 on [0, alpha - 1e-9]."""
    top = alpha - 1e-9
    if top <= 0:
        return True
    grid = [top * i / 32 for i in range(33)]
    grid += [alpha - 2.0 ** -j for j in range(1, 25) if alpha - 2.0 ** -j > 0]
    return all(g(z) >= 0 for z in grid)


def essential_supremum(p, tol=None):
    """Largest k with P(v ≥ k) > 0, as max(k1, k2, k3).

    k1 is the essential infimum of γ, k2 the essential supremum of γ on leaves
    and k3 = inf{k : d(k) ≤ 1}.
    """
    tol = settings.esssup_tol if tol is None else tol
    k1 = p.capacity_essinf()
    k2 = p.leaf_capacity_esssup()
    top = p.capacity_esssup()
    if top <= 0 or d_param(p, tol) <= 1:
        k3 = 0.0
    else:
        # Bracket between consecutive breakpoints first, then bisect.
        lo, hi = tol, top * (1 + 1e-12) + tol
        for b in p.breakpoints():
            if lo < b < hi:
                if d_param(p, b) > 1:
                    lo = b
                else:
                    hi = b
        if hi - lo <= tol:
            k3 = hi
        elif d_param(p, lo + tol / 4) <= 1:
            # d drops below 1 at the capacity atom lo
            k3 = lo
        else:
            k3 = scipy.optimize.bisect(
                lambda k: 1.0 if d_param(p, k) > 1 else -1.0,
                lo, hi, xtol=tol / 4, maxiter=settings.esssup_max_iter)
    return max(k1, k2, k3)


def critical_activation(marginal, k):
    """q_c(k) for the activation-independent family with this (γ, ξ) law.

    The player marks of `marginal` are ignored.
    """
    if k <= 0:
        raise ValueError(f'k={k} must be positive')
    mean, at_1 = marginal.marginal_sums(k)
    if mean == math.inf:
        return 0.0
    if 1 < mean < math.inf:
        return (1 - at_1) / (mean - at_1)
    return 1.0


def conditional_split(p, k, alpha):
    """α_i(k) = P(v < k | root player i) from α(k)."""
    beta = 1.0 - alpha
    values = {}
    for player in Player:
        q = p.q(player)
        if q == 0:
            values[player] = None
            continue
        if player is Player.I:
            mass = (gen_fun(p, player, k, 0.0) + gen_fun(p, player, k, 1.0)
                    - gen_fun(p, player, k, alpha))
        else:
            mass = gen_fun(p, player, k, beta)
        values[player] = min(1.0, max(0.0, float(mass) / q))
    split = ConditionalSplit(
        alpha_I=None if values[Player.I] is None else 1 - values[Player.I],
        alpha_II=None if values[Player.II] is None else 1 - values[Player.II],
        beta_I=values[Player.I],
        beta_II=values[Player.II],
    )
    if (split.alpha_I is not None and split.alpha_II is not None
            and model.validate(p).is_activation_independent):
        assert split.alpha_I <= alpha + 1e-10 <= split.alpha_II + 2e-10, (
            f'α_I={split.alpha_I} α={alpha} α_II={split.alpha_II}')
    return split


def truncated_split(p, k, t):
    """P(v_t ≥ k, root player i) for i = I, II, exactly from the iterates."""
    if t < 0:
        raise ValueError(f't={t} < 0')
    # α_{-1} = 0: at t = 0 only the root capacity counts.
    alpha = alpha_iterates(p, k, t - 1)[-1] if t > 0 else 0.0
    mass_I = (gen_fun(p, Player.I, k, 0.0) + gen_fun(p, Player.I, k, 1.0)
              - gen_fun(p, Player.I, k, alpha))
    mass_II = gen_fun(p, Player.II, k, 1.0 - alpha)
    return float(mass_I), float(mass_II)


class CriticalRatio(NamedTuple):
    q: float
    ratio_I: float
    ratio_II: float


class CriticalRatioTable(NamedTuple):
    q_c: float
    rows: List[CriticalRatio]
    limit_I: float
    limit_II: float

    def extrapolate(self):
        """Linear extrapolation of the two rows closest to q_c to q = q_c."""
        if len(self.rows) < 2:
            return self.rows[0].ratio_I, self.rows[0].ratio_II
        r1, r2 = sorted(self.rows, key=lambda row: row.q)[:2]
        h1, h2 = r1.q - self.q_c, r2.q - self.q_c
        return tuple(
            y1 - h1 * (y2 - y1) / (h2 - h1)
            for y1, y2 in ((r1.ratio_I, r2.ratio_I), (r1.ratio_II, r2.ratio_II)))


def critical_ratios(p_marginal, k, eps_list):
    """β_I/β and β_II/β just above the critical activation probability."""
    diagnostics = model.validate(p_marginal)
    mean, at_1 = p_marginal.marginal_sums(k)
    if not (diagnostics.is_escape and diagnostics.is_activation_independent):
        raise NotApplicableException(
            'critical ratios need an activation-independent escape model')
    if not 1 < mean < math.inf:
        raise NotApplicableException(f'E(1{{γ≥k}} ξ) = {mean} not in (1, ∞)')
    q_c = critical_activation(p_marginal, k)
    rows = []
    for eps in eps_list:
        q = q_c + eps
        if not 0 < q <= 1:
            raise NotApplicableException(f'q_c + {eps} = {q} outside (0, 1]')
        p = p_marginal.with_activation(q)
        alpha = smallest_fixed_point(p, k).alpha
        beta = 1.0 - alpha
        if beta <= 0:
            raise NotApplicableException(f'β = 0 at q = {q}')
        split = conditional_split(p, k, alpha)
        rows.append(CriticalRatio(
            q=q,
            ratio_I=split.beta_of(Player.I) / beta,
            ratio_II=(split.beta_of(Player.II) / beta
                      if split.beta_II is not None else 0.0),
        ))
    return CriticalRatioTable(q_c, rows, mean, at_1)


###############################################################################
# n-ary asymptotics
###############################################################################


def asymptotic_nary(rho_I, rho_II):
    """Eventual monotonicity of P(v < k) along n-ary trees."""
    if not (rho_I >= 0 and rho_II >= 0 and rho_I + rho_II < 1):
        raise ValueError(f'need rho_I + rho_II < 1, got {rho_I}, {rho_II}')
    if rho_I == 0:
        case = CONSTANT
    elif rho_I > 0.5 and rho_II > 0:
        case = EVENTUALLY_INCREASING
    else:
        case = EVENTUALLY_DECREASING
    return AsymptoticReport(case, 1 - rho_I, rho_I, rho_II)


def nary_model(rho_I, rho_II, n):
    """Model with f(x) = 1 - ρ_I(1 - x^n) - ρ_II(1 - x)^n at level k = 1."""
    full = model.PointCapacity(1.0)
    empty = model.PointCapacity(0.0)
    offspring = model.FixedOffspring(n)
    blocks = [
        model.Block(rho_I, Player.I, offspring, full, full),
        model.Block(rho_II, Player.II, offspring, full, full),
        model.Block(1 - rho_I - rho_II, Player.I, offspring, empty, empty),
    ]
    return model.PrimitiveDistribution(b for b in blocks if b.weight > 0)


def nary_alpha(rho_I, rho_II, n):
    """Smallest fixed point of f_n(x) = 1 - ρ_I(1 - x^n) - ρ_II(1 - x)^n."""
    if n < 1:
        raise ValueError(f'n={n} < 1')
    return smallest_fixed_point(nary_model(rho_I, rho_II, n), 1.0).alpha


def crossing_point(rho_I, rho_II, n):
    """y_n = 1 - 1/(1 + (ρ_II/ρ_I)^(1/(n-1))), the point in (0, 1) where f_n
    and f_{n+1} cross: ρ_I y^(n-1) = ρ_II (1-y)^(n-1)."""
    if not (rho_I > 0 and rho_II > 0 and n >= 2):
        raise ValueError('crossing point needs rho_I, rho_II > 0 and n >= 2')
    return 1 - 1 / (1 + (rho_II / rho_I) ** (1 / (n - 1)))


###############################################################################
# atoms
###############################################################################


class AtomReport(NamedTuple):
    k: float
    deltas: List[float]
    gaps: List[float]

    @property
    def max_gap(self):
        return max(self.gaps)


def atom_check(p, k, delta_list):
    """α(k + δ) - α(k - δ) around a level without capacity atom."""
    if p.prob_capacity_atom(k) != 0:
        raise HypothesisFailedException(f'p(γ = {k}) > 0')
    if not p.prob_capacity_below(k) > 0:
        raise HypothesisFailedException(f'p(γ < {k}) = 0')
    gaps = []
    for delta in delta_list:
        if not 0 < delta < k:
            raise ValueError(f'delta={delta} must be in (0, k)')
        gaps.append(smallest_fixed_point(p, k + delta).alpha
                    - smallest_fixed_point(p, k - delta).alpha)
    util.logger.debug('atom check at %g: %s', k, gaps)
    return AtomReport(k, list(delta_list), gaps)
