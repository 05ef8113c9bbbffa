"""Primitive distributions: the joint law of (player, capacity, offspring).

Every node of a random game independently draws the player to move, its
capacity and its number of children from a primitive distribution. Models are
finite mixtures of blocks. Within a block the offspring count has its own law,
and the capacity is drawn from the leaf law when the node has no children and
from the internal law otherwise.

All queries are exact: finite laws are summed, geometric laws use closed forms.

Synopsis:

    p = model.PrimitiveDistribution([
        model.Block(0.5, model.Player.I, model.GeometricOffspring(0.9),
                    model.PointCapacity(0), model.PointCapacity(1)),
        model.Block(0.5, model.Player.II, model.GeometricOffspring(0.9),
                    model.PointCapacity(0), model.PointCapacity(1)),
    ])
    p.block_sum(model.Player.I, 1.0, 'internal_mean')  # E(1{I, γ≥1} ξ)
    model.validate(p).is_escape
"""
from __future__ import annotations

import bisect
import enum
import itertools
import math
from typing import Dict, NamedTuple, Tuple

import numpy as np  # type: ignore

from . import settings, util


class InvalidModelException(Exception):
    """Thrown if a law, a block or a model violates its invariants."""
    pass


class Player(enum.Enum):
    """The maximizer I and the minimizer II."""
    I = 'I'  # noqa: E741
    II = 'II'

    @property
    def opponent(self):
        return Player.II if self is Player.I else Player.I


laws = {}


def register_law(kind):
    """Registers law class `cls` for JSON objects tagged with `kind`."""
    def wrapped(cls):
        laws[kind] = cls
        cls.kind = kind
        return cls
    return wrapped


def law_from_json(d):
    try:
        cls = laws[d['kind']]
    except (KeyError, TypeError):
        raise InvalidModelException(f'unknown law {d!r}')
    try:
        law = cls.from_json(d)
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidModelException(f'malformed law {d!r}: {e}')
    law.check()
    return law


def _cumulative_index(cumulative, u):
    i = bisect.bisect_right(cumulative, u * cumulative[-1])
    return min(i, len(cumulative) - 1)


###############################################################################
# capacity laws
###############################################################################


@register_law('point')
class PointCapacity(NamedTuple):
    """All mass at capacity `c`."""
    c: float

    def check(self):
        if not (math.isfinite(self.c) and self.c >= 0):
            raise InvalidModelException(f'point capacity {self.c} < 0')

    def survival(self, k):
        return 1.0 if k <= self.c else 0.0

    def below(self, k):
        return 1.0 if self.c < k else 0.0

    def atom(self, k):
        return 1.0 if k == self.c else 0.0

    def essinf(self):
        return self.c

    def esssup(self):
        return self.c

    def breakpoints(self):
        return (self.c,)

    def sample(self, u):
        return self.c

    def canonical(self):
        return DiscreteCapacity(((self.c, 1.0),))

    def to_json(self):
        return {'kind': self.kind, 'c': self.c}

    @classmethod
    def from_json(cls, d):
        return cls(float(d['c']))


@register_law('uniform')
class UniformCapacity(NamedTuple):
    """Capacity uniformly distributed on [a, b]."""
    a: float
    b: float

    def check(self):
        if not (math.isfinite(self.b) and 0 <= self.a < self.b):
            raise InvalidModelException(
                f'uniform capacity needs 0 <= a < b, got {self.a}, {self.b}')

    def survival(self, k):
        return min(1.0, max(0.0, (self.b - k) / (self.b - self.a)))

    def below(self, k):
        return min(1.0, max(0.0, (k - self.a) / (self.b - self.a)))

    def atom(self, k):
        return 0.0

    def essinf(self):
        return self.a

    def esssup(self):
        return self.b

    def breakpoints(self):
        return (self.a, self.b)

    def sample(self, u):
        return self.a + u * (self.b - self.a)

    def canonical(self):
        return self

    def to_json(self):
        return {'kind': self.kind, 'a': self.a, 'b': self.b}

    @classmethod
    def from_json(cls, d):
        return cls(float(d['a']), float(d['b']))


@register_law('discrete')
class DiscreteCapacity(NamedTuple):
    """Finitely many capacities `atoms = ((value, weight), ...)`."""
    atoms: Tuple[Tuple[float, float], ...]

    def check(self):
        if not self.atoms:
            raise InvalidModelException('discrete capacity without atoms')
        values = [value for value, _ in self.atoms]
        weights = [weight for _, weight in self.atoms]
        if not all(math.isfinite(v) and v >= 0 for v in values):
            raise InvalidModelException(f'capacities must be >= 0: {values}')
        if any(v1 >= v2 for v1, v2 in zip(values, values[1:])):
            raise InvalidModelException(
                f'capacities must be strictly increasing: {values}')
        if not all(w > 0 for w in weights):
            raise InvalidModelException(f'atom weights must be > 0: {weights}')
        if abs(math.fsum(weights) - 1) > settings.weight_tol:
            raise InvalidModelException(
                f'atom weights sum to {math.fsum(weights)!r}')

    def survival(self, k):
        return math.fsum(w for v, w in self.atoms if v >= k)

    def below(self, k):
        return math.fsum(w for v, w in self.atoms if v < k)

    def atom(self, k):
        return math.fsum(w for v, w in self.atoms if v == k)

    def essinf(self):
        return self.atoms[0][0]

    def esssup(self):
        return self.atoms[-1][0]

    def breakpoints(self):
        return tuple(v for v, _ in self.atoms)

    def sample(self, u):
        cumulative = list(itertools.accumulate(w for _, w in self.atoms))
        return self.atoms[_cumulative_index(cumulative, u)][0]

    def canonical(self):
        return self

    def to_json(self):
        return {'kind': self.kind, 'atoms': [list(a) for a in self.atoms]}

    @classmethod
    def from_json(cls, d):
        return cls(tuple((float(v), float(w)) for v, w in d['atoms']))


###############################################################################
# offspring laws
###############################################################################


@register_law('fixed')
class FixedOffspring(NamedTuple):
    """Exactly `n` children."""
    n: int

    def check(self):
        if not (isinstance(self.n, int) and self.n >= 0):
            raise InvalidModelException(f'offspring count {self.n!r} < 0')

    def pmf(self, m):
        return 1.0 if m == self.n else 0.0

    def pgf(self, x):
        return x ** self.n

    def pgf_positive(self, x):
        return x ** self.n if self.n else x * 0.0

    def pgf_derivative(self, x):
        return self.n * x ** (self.n - 1) if self.n else x * 0.0

    def mean(self):
        return float(self.n)

    def max_support(self):
        return self.n

    def sample(self, u):
        return self.n

    def canonical(self):
        return FiniteOffspring((0.0,) * self.n + (1.0,))

    def to_json(self):
        return {'kind': self.kind, 'n': self.n}

    @classmethod
    def from_json(cls, d):
        n = d['n']
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        return cls(n)


@register_law('pmf')
class FiniteOffspring(NamedTuple):
    """`probs[n]` is the probability of `n` children."""
    probs: Tuple[float, ...]

    def check(self):
        if not self.probs:
            raise InvalidModelException('empty offspring pmf')
        if not all(0 <= p <= 1 for p in self.probs):
            raise InvalidModelException(f'pmf outside [0, 1]: {self.probs}')
        if abs(math.fsum(self.probs) - 1) > settings.weight_tol:
            raise InvalidModelException(
                f'pmf sums to {math.fsum(self.probs)!r}')

    def pmf(self, m):
        return self.probs[m] if 0 <= m < len(self.probs) else 0.0

    def pgf(self, x):
        return np.polynomial.polynomial.polyval(x, self.probs)

    def pgf_positive(self, x):
        return np.polynomial.polynomial.polyval(x, (0.0,) + self.probs[1:])

    def pgf_derivative(self, x):
        coefficients = [n * p for n, p in enumerate(self.probs)][1:]
        return np.polynomial.polynomial.polyval(x, coefficients or [0.0])

    def mean(self):
        return math.fsum(n * p for n, p in enumerate(self.probs))

    def max_support(self):
        return max(n for n, p in enumerate(self.probs) if p > 0)

    def sample(self, u):
        cumulative = list(itertools.accumulate(self.probs))
        i = _cumulative_index(cumulative, u)
        while self.probs[i] == 0:
            i -= 1
        return i

    def canonical(self):
        return FiniteOffspring(self.probs[:self.max_support() + 1])

    def to_json(self):
        return {'kind': self.kind, 'probs': list(self.probs)}

    @classmethod
    def from_json(cls, d):
        return cls(tuple(float(p) for p in d['probs']))


@register_law('geometric')
class GeometricOffspring(NamedTuple):
    """P(ξ = shift + m) = (1 - l) l^m for m = 0, 1, ...

    The shifted variant is the law of ξ conditional on ξ >= shift for the
    unshifted geometric law.
    """
    l: float  # noqa: E741
    shift: int = 0

    def check(self):
        if not 0 < self.l < 1:
            raise InvalidModelException(f'geometric l={self.l} not in (0, 1)')
        if not (isinstance(self.shift, int) and self.shift >= 0):
            raise InvalidModelException(f'geometric shift {self.shift!r} < 0')

    def pmf(self, m):
        if m < self.shift:
            return 0.0
        return (1 - self.l) * self.l ** (m - self.shift)

    def pgf(self, x):
        return x ** self.shift * (1 - self.l) / (1 - self.l * x)

    def pgf_positive(self, x):
        return self.pgf(x) - self.pmf(0)

    def pgf_derivative(self, x):
        l, s = self.l, self.shift
        tail = (1 - l) * l * x ** s / (1 - l * x) ** 2
        if s == 0:
            return tail
        return (1 - l) * s * x ** (s - 1) / (1 - l * x) + tail

    def mean(self):
        return self.shift + self.l / (1 - self.l)

    def max_support(self):
        return None

    def sample(self, u):
        return self.shift + int(math.floor(math.log1p(-u) / math.log(self.l)))

    def canonical(self):
        return self

    def to_json(self):
        return {'kind': self.kind, 'l': self.l, 'shift': self.shift}

    @classmethod
    def from_json(cls, d):
        shift = d.get('shift', 0)
        if isinstance(shift, float) and shift.is_integer():
            shift = int(shift)
        return cls(float(d['l']), shift)


###############################################################################
# blocks & models
###############################################################################


class Block(NamedTuple):
    """A weighted component of a primitive distribution.

    Args:
      weight: Mixture weight in (0, 1].
      player: Player to move at nodes drawn from this block.
      offspring: Law of the number of children.
      capacity_leaf: Law of the capacity given no children.
      capacity_internal: Law of the capacity given at least one child.
    """
    weight: float
    player: Player
    offspring: object
    capacity_leaf: object
    capacity_internal: object

    def check(self):
        if not (math.isfinite(self.weight) and 0 < self.weight <= 1):
            raise InvalidModelException(f'block weight {self.weight} not in (0, 1]')
        if not isinstance(self.player, Player):
            raise InvalidModelException(f'bad player {self.player!r}')
        for law in (self.offspring, self.capacity_leaf, self.capacity_internal):
            if not hasattr(law, 'check'):
                raise InvalidModelException(f'bad law {law!r}')
            law.check()
        if not hasattr(self.offspring, 'pgf'):
            raise InvalidModelException(f'{self.offspring!r} is no offspring law')
        for law in (self.capacity_leaf, self.capacity_internal):
            if not hasattr(law, 'survival'):
                raise InvalidModelException(f'{law!r} is no capacity law')

    def term(self, k, mode, x=None):
        pmf0 = self.offspring.pmf(0)
        if mode == 'leaf':
            return self.weight * self.capacity_leaf.survival(k) * pmf0
        survival = self.capacity_internal.survival(k)
        if survival == 0:
            return 0.0 if x is None else x * 0.0
        if mode == 'internal_pgf':
            return self.weight * survival * self.offspring.pgf_positive(x)
        if mode == 'internal_mean':
            return self.weight * survival * self.offspring.mean()
        if mode == 'internal_at_1':
            return self.weight * survival * self.offspring.pmf(1)
        if mode == 'internal_pgf_derivative':
            return self.weight * survival * self.offspring.pgf_derivative(x)
        raise ValueError(f'unknown mode {mode!r}')

    def below(self, k):
        pmf0 = self.offspring.pmf(0)
        below = 0.0
        if pmf0 > 0:
            below += pmf0 * self.capacity_leaf.below(k)
        if pmf0 < 1:
            below += (1 - pmf0) * self.capacity_internal.below(k)
        return below

    def atom(self, k):
        pmf0 = self.offspring.pmf(0)
        atom = 0.0
        if pmf0 > 0:
            atom += pmf0 * self.capacity_leaf.atom(k)
        if pmf0 < 1:
            atom += (1 - pmf0) * self.capacity_internal.atom(k)
        return atom

    def capacity_laws(self):
        """Capacity laws carrying positive mass within the block."""
        pmf0 = self.offspring.pmf(0)
        return tuple(law for law, mass in (
            (self.capacity_leaf, pmf0),
            (self.capacity_internal, 1 - pmf0),
        ) if mass > 0)

    def to_json(self):
        return {
            'weight': self.weight,
            'player': self.player.value,
            'offspring': self.offspring.to_json(),
            'capacity_leaf': self.capacity_leaf.to_json(),
            'capacity_internal': self.capacity_internal.to_json(),
        }

    @classmethod
    def from_json(cls, d):
        try:
            return cls(
                weight=float(d['weight']),
                player=Player(d['player']),
                offspring=law_from_json(d['offspring']),
                capacity_leaf=law_from_json(d['capacity_leaf']),
                capacity_internal=law_from_json(d['capacity_internal']),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidModelException(f'malformed block {d!r}: {e}')


MODES = ('leaf', 'internal_pgf', 'internal_mean', 'internal_at_1',
         'internal_pgf_derivative')


class PrimitiveDistribution:
    """Finite mixture of blocks; immutable after construction."""

    def __init__(self, blocks):
        self.blocks = tuple(blocks)
        if not self.blocks:
            raise InvalidModelException('empty block list')
        for block in self.blocks:
            if not isinstance(block, Block):
                raise InvalidModelException(f'not a block: {block!r}')
            block.check()
        total = math.fsum(block.weight for block in self.blocks)
        if abs(total - 1) > settings.weight_tol:
            raise InvalidModelException(f'block weights sum to {total!r}')
        self._cumulative = list(
            itertools.accumulate(block.weight for block in self.blocks))

    def __eq__(self, other):
        return (isinstance(other, PrimitiveDistribution)
                and self.blocks == other.blocks)

    def __hash__(self):
        return hash(self.blocks)

    def __repr__(self):
        return f'{type(self).__name__}({list(self.blocks)!r})'

    def q(self, player):
        """Activation probability of `player`."""
        return math.fsum(b.weight for b in self.blocks if b.player is player)

    def block_sum(self, player, k, mode, x=None):
        """Σ over `player`'s blocks of the `mode` term at capacity level `k`.

        Modes: `leaf` = p_i(k, 0); `internal_pgf` = Σ_{n≥1} p_i(k, n) x^n;
        `internal_mean` = E(1{ι=i, γ≥k} ξ); `internal_at_1` = p_i(k, 1);
        `internal_pgf_derivative` = E(1{ι=i, γ≥k} ξ x^(ξ-1)).
        """
        if mode not in MODES:
            raise ValueError(f'unknown mode {mode!r}')
        if mode in ('internal_pgf', 'internal_pgf_derivative') and x is None:
            raise ValueError(f'mode {mode!r} needs x')
        total = 0.0 if x is None else x * 0.0
        for block in self.blocks:
            if block.player is player:
                total = total + block.term(k, mode, x)
        return total

    def prob_capacity_below(self, k):
        """p(γ < k)."""
        return math.fsum(b.weight * b.below(k) for b in self.blocks)

    def prob_capacity_atom(self, k):
        """p(γ = k)."""
        return math.fsum(b.weight * b.atom(k) for b in self.blocks)

    def leaf_mass_at_least(self, k):
        """p(γ ≥ k, ξ = 0)."""
        return math.fsum(b.term(k, 'leaf') for b in self.blocks)

    def marginal_sums(self, k):
        """(E(1{γ≥k} ξ), p(γ≥k, ξ=1)) over both players."""
        return (
            math.fsum(b.term(k, 'internal_mean') for b in self.blocks),
            math.fsum(b.term(k, 'internal_at_1') for b in self.blocks),
        )

    def offspring_mean(self):
        return math.fsum(b.weight * b.offspring.mean() for b in self.blocks)

    def capacity_essinf(self):
        return min(law.essinf() for b in self.blocks
                   for law in b.capacity_laws())

    def capacity_esssup(self):
        return max(law.esssup() for b in self.blocks
                   for law in b.capacity_laws())

    def leaf_capacity_esssup(self):
        """Essential supremum of γ on {ξ = 0}; 0 without leaf mass."""
        return max([b.capacity_leaf.esssup() for b in self.blocks
                    if b.offspring.pmf(0) > 0] or [0.0])

    def breakpoints(self):
        return sorted({x for b in self.blocks for law in b.capacity_laws()
                       for x in law.breakpoints()})

    def draw(self, u_block, u_offspring, u_capacity):
        """Inverse-CDF draw of (player, capacity, ξ) from three uniforms."""
        block = self.blocks[_cumulative_index(self._cumulative, u_block)]
        n = block.offspring.sample(u_offspring)
        law = block.capacity_leaf if n == 0 else block.capacity_internal
        return block.player, law.sample(u_capacity), n

    def with_activation(self, q):
        """Member of the activation-independent family with q_I = `q`.

        Built from the (γ, ξ) marginal of this model; blocks with identical
        laws are merged.
        """
        if not 0 <= q <= 1:
            raise InvalidModelException(f'activation probability {q} not in [0, 1]')
        marginal: Dict[tuple, float] = {}
        for b in self.blocks:
            key = (b.offspring, b.capacity_leaf, b.capacity_internal)
            marginal[key] = marginal.get(key, 0.0) + b.weight
        blocks = []
        for player, share in ((Player.I, q), (Player.II, 1 - q)):
            for (offspring, leaf, internal), weight in marginal.items():
                if share * weight > 0:
                    blocks.append(Block(
                        share * weight, player, offspring, leaf, internal))
        return PrimitiveDistribution(blocks)

    def to_json(self):
        return {'blocks': [block.to_json() for block in self.blocks]}

    @classmethod
    def from_json(cls, d):
        try:
            blocks = d['blocks']
        except (KeyError, TypeError):
            raise InvalidModelException('model needs a "blocks" list')
        if not isinstance(blocks, list):
            raise InvalidModelException('model needs a "blocks" list')
        return cls(Block.from_json(block) for block in blocks)


###############################################################################
# operations
###############################################################################


def survival(law, k):
    """P(γ ≥ k) for a capacity law."""
    return law.survival(k)


def pgf(law, x):
    return law.pgf(x)


def pgf_positive(law, x):
    """Σ_{n≥1} pmf(n) x^n."""
    return law.pgf_positive(x)


def p_block_sum(p, player, k, mode, x=None):
    return p.block_sum(player, k, mode, x)


class ModelDiagnostics(NamedTuple):
    is_escape: bool
    is_activation_independent: bool
    q_I: float
    offspring_mean: float
    capacity_essinf: float
    capacity_esssup_on_leaves: float


def _player_mixture(p, player):
    q = p.q(player)
    mixture: Dict[tuple, float] = {}
    for b in p.blocks:
        if b.player is not player:
            continue
        offspring = b.offspring.canonical()
        pmf0 = offspring.pmf(0)
        key = (
            offspring,
            b.capacity_leaf.canonical() if pmf0 > 0 else None,
            b.capacity_internal.canonical() if pmf0 < 1 else None,
        )
        mixture[key] = mixture.get(key, 0.0) + b.weight / q
    return mixture


def _activation_independent(p):
    if p.q(Player.I) == 0 or p.q(Player.II) == 0:
        return True
    mixture_I = _player_mixture(p, Player.I)
    mixture_II = _player_mixture(p, Player.II)
    if set(mixture_I) != set(mixture_II):
        return False
    return all(abs(mixture_I[key] - mixture_II[key]) <= settings.weight_tol
               for key in mixture_I)


def validate(p):
    """Computes the `ModelDiagnostics` of `p`."""
    if not isinstance(p, PrimitiveDistribution):
        raise InvalidModelException(f'not a model: {p!r}')
    leaves_at_zero = all(
        b.capacity_leaf.esssup() == 0
        for b in p.blocks if b.offspring.pmf(0) > 0)
    essinf = p.capacity_essinf()
    return ModelDiagnostics(
        is_escape=leaves_at_zero and essinf == 0,
        is_activation_independent=_activation_independent(p),
        q_I=p.q(Player.I),
        offspring_mean=p.offspring_mean(),
        capacity_essinf=essinf,
        capacity_esssup_on_leaves=p.leaf_capacity_esssup(),
    )


def model_hash(p):
    return util.digest(p.to_json())


def load_model(path):
    with open(path, 'rb') as f:
        data = f.read()
    try:
        d = util.deserialize(data)
    except ValueError as e:
        raise InvalidModelException(f'{path}: {e}')
    return PrimitiveDistribution.from_json(d)


def dump_model(p, path):
    with open(path, 'wb') as f:
        f.write(util.serialize(p.to_json(), indent=2))
