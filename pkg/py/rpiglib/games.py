"""Sampled games, backward induction and strategies.

A `Game` is a truncated random game stored breadth first in flat numpy arrays:
node 0 is the root and the children of every node are contiguous. Nodes are
drawn with path-keyed randomness (see `rng`), so `sample_game` with a larger
truncation depth extends the same game and the lazy evaluators
`value_at_least` / `conditional_root` agree with the materialized game for
every seed.

Synopsis:

    g = games.sample_game(p, seed=1, truncation_depth=6)
    values = games.subgame_values(g)
    values.root
    star = games.conditional_game(g, values, k=0.5)
"""
from __future__ import annotations

import collections
import itertools
from typing import Dict, NamedTuple

import numpy as np  # type: ignore

from . import model, rng, settings
from .model import Player


PLAYERS = (Player.I, Player.II)
CODES = {Player.I: 0, Player.II: 1}


class BudgetExceededException(Exception):
    """Thrown if a game needs more nodes than the budget allows."""

    def __init__(self, partial_count):
        super().__init__(f'node budget exceeded after {partial_count} nodes')
        self.partial_count = partial_count


class IncompleteStrategyException(Exception):
    """Thrown if a strategy has no choice at a node reached during play."""

    def __init__(self, node):
        super().__init__(f'no choice at node {node}')
        self.node = node


class ValueBelowKException(Exception):
    """Thrown if the root value is below the conditioning level."""
    pass


class Game:
    """A truncated marked ordered tree in breadth-first order.

    Args:
      players: Per node 0 (player I) or 1 (player II).
      capacities: Per node capacity.
      offspring: Per node drawn number of children. Equals `num_children`
        except at the truncation boundary, where nodes are not expanded.
      num_children: Per node number of children present in the arena.
      truncation_depth: Nodes at this depth have no children.
      seed: Seed the game was sampled with.
      model_hash: Digest of the model the game was sampled from.
    """

    def __init__(self, players, capacities, offspring, num_children,
                 truncation_depth, seed=0, model_hash=''):
        self.players = np.asarray(players, dtype=np.int8)
        self.capacities = np.asarray(capacities, dtype=np.float64)
        self.offspring = np.asarray(offspring, dtype=np.int64)
        self.num_children = np.asarray(num_children, dtype=np.int64)
        self.truncation_depth = int(truncation_depth)
        self.seed = int(seed)
        self.model_hash = model_hash

        n = len(self.players)
        assert n >= 1, 'empty game'
        assert (len(self.capacities) == len(self.offspring)
                == len(self.num_children) == n), 'ragged node arrays'
        assert np.all((self.players == 0) | (self.players == 1)), 'bad player'
        assert np.all(self.capacities >= 0), 'negative capacity'
        assert np.all(self.num_children >= 0), 'negative child count'
        assert int(self.num_children.sum()) == n - 1, (
            f'{n} nodes but {int(self.num_children.sum())} children')

        self.first_child = np.concatenate(
            [[1], 1 + np.cumsum(self.num_children)[:-1]]).astype(np.int64)
        depth = [0] * n
        fc, nc = self.first_child.tolist(), self.num_children.tolist()
        for h in range(n):
            if nc[h]:
                assert fc[h] > h, f'node {h} is not in breadth-first order'
                for c in range(fc[h], fc[h] + nc[h]):
                    depth[c] = depth[h] + 1
        self.depth = np.asarray(depth, dtype=np.int64)
        assert self.depth.max() <= self.truncation_depth, 'node below truncation'
        assert not np.any(
            (self.depth == self.truncation_depth) & (self.num_children > 0)
        ), 'boundary node has children'

        for array in (self.players, self.capacities, self.offspring,
                      self.num_children, self.first_child, self.depth):
            array.setflags(write=False)

    def __len__(self):
        return len(self.players)

    def __eq__(self, other):
        return (isinstance(other, Game)
                and self.truncation_depth == other.truncation_depth
                and self.seed == other.seed
                and self.model_hash == other.model_hash
                and np.array_equal(self.players, other.players)
                and np.array_equal(self.capacities, other.capacities)
                and np.array_equal(self.offspring, other.offspring)
                and np.array_equal(self.num_children, other.num_children))

    def __repr__(self):
        return (f'Game(nodes={len(self)}, truncation_depth='
                f'{self.truncation_depth}, seed={self.seed})')

    def player(self, h):
        return PLAYERS[int(self.players[h])]

    def children(self, h):
        start = int(self.first_child[h])
        return range(start, start + int(self.num_children[h]))

    def decision_nodes(self, owner):
        """Nodes where `owner` moves and has a choice to make."""
        return [int(h) for h in np.flatnonzero(
            (self.players == CODES[owner]) & (self.num_children > 0))]

    def replace(self, **kw):
        fields = dict(
            players=self.players, capacities=self.capacities,
            offspring=self.offspring, num_children=self.num_children,
            truncation_depth=self.truncation_depth, seed=self.seed,
            model_hash=self.model_hash)
        fields.update(kw)
        return Game(**fields)

    def to_json(self):
        return {
            'seed': self.seed,
            'truncation_depth': self.truncation_depth,
            'model_hash': self.model_hash,
            'nodes': [
                [PLAYERS[player].value, capacity, children, offspring]
                for player, capacity, children, offspring in zip(
                    self.players.tolist(), self.capacities.tolist(),
                    self.num_children.tolist(), self.offspring.tolist())
            ],
        }

    @classmethod
    def from_json(cls, d):
        nodes = d['nodes']
        return cls(
            players=[CODES[Player(node[0])] for node in nodes],
            capacities=[float(node[1]) for node in nodes],
            num_children=[int(node[2]) for node in nodes],
            offspring=[int(node[3]) if len(node) > 3 else int(node[2])
                       for node in nodes],
            truncation_depth=d['truncation_depth'],
            seed=d.get('seed', 0),
            model_hash=d.get('model_hash', ''),
        )


class ValueAnnotation(NamedTuple):
    values: np.ndarray

    @property
    def root(self):
        return float(self.values[0])


class Strategy(NamedTuple):
    """Child ordinal (1-based) chosen by `owner` at each decision node."""
    owner: Player
    choice: Dict[int, int]


###############################################################################
# sampling
###############################################################################


def draw_node(p, key):
    return p.draw(*rng.uniforms(key, 3))


def sample_game(p, seed, truncation_depth, node_budget=None, model_hash=None):
    """Samples the game truncated at `truncation_depth`, breadth first."""
    node_budget = settings.node_budget if node_budget is None else node_budget
    if node_budget < 1:
        raise ValueError(f'node_budget={node_budget} < 1')
    if truncation_depth < 0:
        raise ValueError(f'truncation_depth={truncation_depth} < 0')
    players, capacities, offspring, num_children = [], [], [], []
    queue = collections.deque([(rng.root_key(seed), 0)])
    while queue:
        key, depth = queue.popleft()
        player, capacity, n = draw_node(p, key)
        expanded = n if depth < truncation_depth else 0
        if len(players) + 1 + len(queue) + expanded > node_budget:
            raise BudgetExceededException(len(players))
        players.append(CODES[player])
        capacities.append(capacity)
        offspring.append(n)
        num_children.append(expanded)
        for j in range(1, expanded + 1):
            queue.append((rng.child_key(key, j), depth + 1))
    return Game(players, capacities, offspring, num_children, truncation_depth,
                seed=seed,
                model_hash=model.model_hash(p) if model_hash is None else model_hash)


###############################################################################
# backward induction
###############################################################################


def subgame_values(g):
    """Value of every subgame, by one reverse pass over the arena."""
    caps = g.capacities.tolist()
    nc = g.num_children.tolist()
    fc = g.first_child.tolist()
    players = g.players.tolist()
    values = [0.0] * len(caps)
    for h in reversed(range(len(caps))):
        if nc[h] == 0:
            values[h] = caps[h]
            continue
        children = values[fc[h]:fc[h] + nc[h]]
        best = max(children) if players[h] == 0 else min(children)
        values[h] = min(caps[h], best)
    return ValueAnnotation(np.asarray(values, dtype=np.float64))


def payoff(g, s_I, s_II):
    """Smallest capacity along the play of `s_I` against `s_II`."""
    strategies = {s_I.owner: s_I, s_II.owner: s_II}
    h = 0
    result = float(g.capacities[0])
    while g.num_children[h] > 0:
        choice = strategies[g.player(h)].choice.get(h)
        if choice is None:
            raise IncompleteStrategyException(h)
        assert 1 <= choice <= g.num_children[h], f'bad choice {choice} at {h}'
        h = int(g.first_child[h]) + choice - 1
        result = min(result, float(g.capacities[h]))
    return result


def response_value(g, strategy):
    """Value when `strategy.owner` plays `strategy` and the opponent replies best."""
    owner = CODES[strategy.owner]
    caps = g.capacities.tolist()
    nc = g.num_children.tolist()
    fc = g.first_child.tolist()
    players = g.players.tolist()
    values = [0.0] * len(caps)
    for h in reversed(range(len(caps))):
        if nc[h] == 0:
            values[h] = caps[h]
            continue
        if players[h] == owner:
            choice = strategy.choice.get(h)
            if choice is None:
                raise IncompleteStrategyException(h)
            best = values[fc[h] + choice - 1]
        else:
            children = values[fc[h]:fc[h] + nc[h]]
            best = max(children) if players[h] == 0 else min(children)
        values[h] = min(caps[h], best)
    return values[0]


def strategies(g, owner):
    """All complete strategies of `owner`; exponential, for small games."""
    nodes = g.decision_nodes(owner)
    ranges = [range(1, int(g.num_children[h]) + 1) for h in nodes]
    for choices in itertools.product(*ranges):
        yield Strategy(owner, dict(zip(nodes, choices)))


def bruteforce_value(g):
    """max over I-strategies of min over II-strategies of the payoff."""
    strategies_II = list(strategies(g, Player.II))
    return max(
        min(payoff(g, s_I, s_II) for s_II in strategies_II)
        for s_I in strategies(g, Player.I))


###############################################################################
# transforms
###############################################################################


def _kept_children(g, v, h, k):
    return [c for c in g.children(h) if v[c] >= k]


def optimal_subtree(g, values, k):
    """Nodes reachable from the root through subgames of value at least `k`."""
    v = values.values.tolist()
    if not v[0] >= k:
        raise ValueBelowKException(f'root value {v[0]} < {k}')
    tree = []
    queue = collections.deque([0])
    while queue:
        h = queue.popleft()
        tree.append(h)
        kept = _kept_children(g, v, h, k)
        n = int(g.num_children[h])
        if g.player(h) is Player.I:
            assert n == 0 or kept, f'I-node {h} of value {v[h]} has no child in T*'
        else:
            assert len(kept) == n, f'II-node {h} lost children in T*'
        queue.extend(kept)
    return np.asarray(tree, dtype=np.int64)


def conditional_game(g, values, k):
    """The game restricted to its k-optimal subtree, renumbered breadth first."""
    tree = optimal_subtree(g, values, k).tolist()
    v = values.values.tolist()
    kept = [len(_kept_children(g, v, h, k)) for h in tree]
    offspring = [
        int(g.offspring[h]) if g.depth[h] == g.truncation_depth else n
        for h, n in zip(tree, kept)]
    star = Game(
        players=g.players[tree], capacities=g.capacities[tree],
        offspring=offspring, num_children=kept,
        truncation_depth=g.truncation_depth, seed=g.seed,
        model_hash=g.model_hash)
    root = subgame_values(star).root
    assert root == values.root, f'conditional root value {root} != {values.root}'
    return star


def avoidance_game(g):
    """Zeroes the capacity of every II-node with at least two children."""
    avoided = (g.players == CODES[Player.II]) & (g.offspring >= 2)
    return g.replace(capacities=np.where(avoided, 0.0, g.capacities))


def simple_strategy(g, owner, k, values=None):
    """Youngest child of value ≥ k (I) or ≤ k (II); the first child if none."""
    values = subgame_values(g) if values is None else values
    v = values.values.tolist()
    choice = {}
    for h in g.decision_nodes(owner):
        choice[h] = next(
            (j for j, c in enumerate(g.children(h), 1)
             if (v[c] >= k if owner is Player.I else v[c] <= k)),
            1)
    return Strategy(owner, choice)


###############################################################################
# lazy evaluation
###############################################################################


class _Budget:

    def __init__(self, limit):
        self.limit = settings.node_budget if limit is None else limit
        self.count = 0

    def charge(self):
        if self.count >= self.limit:
            raise BudgetExceededException(self.count)
        self.count += 1


def _at_least(p, key, depth, t, k, follow, budget):
    budget.charge()
    player, capacity, n = draw_node(p, key)
    if capacity < k:
        return False
    if depth >= t or n == 0:
        return True
    if player is follow:
        n = 1
    children = (_at_least(p, rng.child_key(key, j), depth + 1, t, k, follow, budget)
                for j in range(1, n + 1))
    return any(children) if player is Player.I else all(children)


def value_at_least(p, seed, truncation_depth, k, follow=None, node_budget=None):
    """Whether the truncated value is at least `k`, without building the game.

    With `follow` set, that player always moves to its first child and the
    result is whether the opponent can secure `k` against this.
    """
    return _at_least(p, rng.root_key(seed), 0, truncation_depth, k, follow,
                     _Budget(node_budget))


def conditional_root(p, seed, truncation_depth, k, node_budget=None):
    """(root player, root children in T*) if the truncated value is ≥ k."""
    budget = _Budget(node_budget)
    key = rng.root_key(seed)
    budget.charge()
    player, capacity, n = draw_node(p, key)
    if capacity < k:
        return None
    if truncation_depth == 0 or n == 0:
        return player, 0
    wins = (_at_least(p, rng.child_key(key, j), 1, truncation_depth, k, None, budget)
            for j in range(1, n + 1))
    if player is Player.I:
        count = sum(wins)
        return (player, count) if count else None
    return (player, n) if all(wins) else None
