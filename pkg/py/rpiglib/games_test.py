import math
import unittest

import numpy as np  # type: ignore

from . import games, model, presets, rng, transforms, util, vgf
from .games import Game, Strategy
from .model import Player


def grid_capacity(*values):
    return model.DiscreteCapacity(tuple((v, 1 / len(values)) for v in values))


def grid_model():
    """Small trees with capacities on a finite grid, so values never tie by rounding."""
    offspring = model.FiniteOffspring((0.3, 0.3, 0.4))
    leaf = grid_capacity(0.0, 1.0)
    internal = grid_capacity(0.25, 0.5, 0.75, 1.0)
    return model.PrimitiveDistribution([
        model.Block(0.5, Player.I, offspring, leaf, internal),
        model.Block(0.5, Player.II, offspring, leaf, internal),
    ])


def geometric(l=0.6, q=0.9):  # noqa: E741
    return presets.preset('geometric-escape', l=l, q=q)


def nary(n=3, q=0.7):
    return presets.preset('nary-uniform', n=n, q=q)


def two_leaves(root_player):
    return Game(players=[games.CODES[root_player], 0, 0],
                capacities=[1.0, 0.3, 0.7], offspring=[2, 0, 0],
                num_children=[2, 0, 0], truncation_depth=1)


def binary_trap(depth):
    """II-only binary tree; every first child has capacity 1, every second 0."""
    n_inner = 2 ** depth - 1
    n = 2 ** (depth + 1) - 1
    capacities = [1.0] + [1.0 if h % 2 == 1 else 0.0 for h in range(1, n)]
    return Game(players=[1] * n, capacities=capacities, offspring=[2] * n,
                num_children=[2] * n_inner + [0] * (n - n_inner),
                truncation_depth=depth)


class TestGame(unittest.TestCase):

    def test_layout(self):
        g = binary_trap(2)
        self.assertEqual(len(g), 7)
        self.assertEqual(list(g.children(0)), [1, 2])
        self.assertEqual(list(g.children(2)), [5, 6])
        self.assertEqual(list(g.children(3)), [])
        self.assertEqual(g.depth.tolist(), [0, 1, 1, 2, 2, 2, 2])
        self.assertEqual(g.decision_nodes(Player.II), [0, 1, 2])
        self.assertEqual(g.decision_nodes(Player.I), [])
        self.assertIs(g.player(0), Player.II)

    def test_invalid(self):
        with self.assertRaises(AssertionError):
            Game([0, 0], [1.0, 1.0], [1, 0], [1, 0], truncation_depth=0)
        with self.assertRaises(AssertionError):
            Game([0, 0], [1.0, 1.0], [2, 0], [2, 0], truncation_depth=1)
        with self.assertRaises(AssertionError):
            Game([0], [-1.0], [0], [0], truncation_depth=0)

    def test_immutable(self):
        g = binary_trap(1)
        with self.assertRaises(ValueError):
            g.capacities[0] = 0.0

    def test_json(self):
        g = games.sample_game(nary(), seed=4, truncation_depth=3)
        self.assertEqual(Game.from_json(g.to_json()), g)
        self.assertEqual(
            Game.from_json(util.deserialize(util.serialize(g.to_json()))), g)
        self.assertEqual(g.to_json()['nodes'][0][0], g.player(0).value)


class TestSampling(unittest.TestCase):

    def test_deterministic(self):
        p = geometric()
        for seed in range(20):
            self.assertEqual(games.sample_game(p, seed, 5),
                             games.sample_game(p, seed, 5))

    def test_fuzz(self):
        for p in (geometric(), nary(2, 0.4), grid_model(),
                  presets.preset('finite-uniform-leaf',
                                 offspring=model.FiniteOffspring((0.5, 0.2, 0.3)),
                                 q=0.5)):
            for seed in range(200):
                g = games.sample_game(p, seed, 4)
                self.assertEqual(g.model_hash, model.model_hash(p))
                boundary = g.depth == g.truncation_depth
                np.testing.assert_array_equal(g.num_children[~boundary],
                                              g.offspring[~boundary])

    def test_nary(self):
        g = games.sample_game(nary(3), seed=11, truncation_depth=4)
        self.assertEqual(len(g), 1 + 3 + 9 + 27 + 81)
        self.assertEqual(set(g.num_children[g.depth < 4].tolist()), {3})
        self.assertTrue(np.all(g.offspring == 3))
        self.assertEqual(g.depth[0], 0)

    def test_prefix(self):
        p = geometric()
        for seed in range(20):
            short = games.sample_game(p, seed, 2)
            long = games.sample_game(p, seed, 5)
            n = int(np.count_nonzero(long.depth <= 2))
            self.assertEqual(len(short), n)
            np.testing.assert_array_equal(short.capacities, long.capacities[:n])
            np.testing.assert_array_equal(short.offspring, long.offspring[:n])

    def test_root_offspring_mean(self):
        p = geometric(l=0.6, q=0.5)
        xs = np.array([games.sample_game(p, rng.stream_seed(0, j), 0,
                                         model_hash='').offspring[0]
                       for j in range(20000)])
        stderr = xs.std(ddof=1) / math.sqrt(len(xs))
        self.assertLess(abs(xs.mean() - 1.5), 4 * stderr)

    def test_budget(self):
        p = nary(3)
        with self.assertRaises(games.BudgetExceededException) as e:
            games.sample_game(p, seed=0, truncation_depth=3, node_budget=5)
        self.assertLessEqual(e.exception.partial_count, 5)
        self.assertEqual(len(games.sample_game(p, 0, 2, node_budget=13)), 13)
        with self.assertRaises(ValueError):
            games.sample_game(p, seed=0, truncation_depth=3, node_budget=0)
        with self.assertRaises(ValueError):
            games.sample_game(p, seed=0, truncation_depth=-1)


class TestValues(unittest.TestCase):

    def test_hand_examples(self):
        self.assertEqual(games.subgame_values(two_leaves(Player.II)).root, 0.3)
        self.assertEqual(games.subgame_values(two_leaves(Player.I)).root, 0.7)
        single = Game([0], [0.4], [3], [0], truncation_depth=0)
        self.assertEqual(games.subgame_values(single).root, 0.4)

    def test_truncation_monotone(self):
        p = geometric(l=0.6, q=0.7)
        for seed in range(100):
            values = [games.subgame_values(games.sample_game(p, seed, t)).root
                      for t in range(7)]
            self.assertTrue(all(v1 >= v2 for v1, v2 in zip(values, values[1:])),
                            msg=f'seed={seed}: {values}')

    def test_bruteforce(self):
        p = grid_model()
        checked = 0
        for seed in range(400):
            g = games.sample_game(p, seed, 3)
            nodes = g.decision_nodes(Player.I) + g.decision_nodes(Player.II)
            if len(nodes) > 10:
                continue
            checked += 1
            root = games.subgame_values(g).root
            self.assertEqual(games.bruteforce_value(g), root, msg=f'seed={seed}')
        self.assertGreater(checked, 100)

    def test_payoff(self):
        p = grid_model()
        for seed in range(100):
            g = games.sample_game(p, seed, 3)
            if len(g.decision_nodes(Player.II)) > 8:
                continue
            values = games.subgame_values(g)
            greedy = games.simple_strategy(g, Player.I, values.root, values)
            for s_II in games.strategies(g, Player.II):
                result = games.payoff(g, greedy, s_II)
                self.assertGreaterEqual(result, values.root)
                self.assertLessEqual(result, g.capacities[0])
            self.assertEqual(games.response_value(g, greedy), values.root)

    def test_incomplete_strategy(self):
        g = two_leaves(Player.I)
        with self.assertRaises(games.IncompleteStrategyException) as e:
            games.payoff(g, Strategy(Player.I, {}), Strategy(Player.II, {}))
        self.assertEqual(e.exception.node, 0)
        self.assertEqual(games.payoff(g, Strategy(Player.I, {0: 1}),
                                      Strategy(Player.II, {})), 0.3)


class TestLazyEvaluation(unittest.TestCase):

    def test_value_at_least(self):
        for p, k, t in ((nary(3, 0.7), 0.05, 4), (nary(2, 0.7), 0.3, 6),
                        (geometric(), 1.0, 6), (grid_model(), 0.5, 4)):
            for seed in range(100):
                g = games.sample_game(p, seed, t)
                self.assertEqual(games.value_at_least(p, seed, t, k),
                                 games.subgame_values(g).root >= k,
                                 msg=f'seed={seed}')

    def test_follow(self):
        p = grid_model()
        for seed in range(200):
            g = games.sample_game(p, seed, 4)
            first = Strategy(Player.II, {h: 1 for h in g.decision_nodes(Player.II)})
            self.assertEqual(
                games.value_at_least(p, seed, 4, 0.5, follow=Player.II),
                games.response_value(g, first) >= 0.5, msg=f'seed={seed}')

    def test_conditional_root(self):
        for p, k, t in ((nary(3, 0.7), 0.05, 4), (geometric(), 1.0, 6),
                        (grid_model(), 0.5, 3)):
            for seed in range(100):
                g = games.sample_game(p, seed, t)
                values = games.subgame_values(g)
                root = games.conditional_root(p, seed, t, k)
                if values.root < k:
                    self.assertIsNone(root)
                    continue
                star = games.conditional_game(g, values, k)
                self.assertEqual(root, (g.player(0), int(star.num_children[0])))

    def test_root_only(self):
        p = nary(3)
        self.assertIn(games.conditional_root(p, 0, 0, 0.0),
                      ((Player.I, 0), (Player.II, 0)))

    def test_budget(self):
        with self.assertRaises(games.BudgetExceededException):
            games.value_at_least(nary(3, 0.0), 0, 6, 0.0, node_budget=10)


class TestTransforms(unittest.TestCase):

    def test_conditional_game(self):
        p = geometric()
        accepted = 0
        for seed in range(300):
            g = games.sample_game(p, seed, 6)
            values = games.subgame_values(g)
            if values.root < 1.0:
                continue
            accepted += 1
            star = games.conditional_game(g, values, 1.0)
            self.assertEqual(games.subgame_values(star).root, values.root)
            inner = star.depth < star.truncation_depth
            self.assertTrue(np.all(star.num_children[inner] > 0))
            self.assertTrue(np.all(star.capacities >= 1.0))
            tree = games.optimal_subtree(g, values, 1.0)
            self.assertEqual(len(tree), len(star))
            np.testing.assert_array_equal(g.capacities[tree], star.capacities)
        self.assertGreater(accepted, 30)

    def test_full_subtree(self):
        full = model.PointCapacity(1.0)
        p = model.PrimitiveDistribution([model.Block(
            1.0, Player.II, model.FiniteOffspring((0.3, 0.3, 0.4)), full, full)])
        g = games.sample_game(p, 5, 4)
        values = games.subgame_values(g)
        np.testing.assert_array_equal(games.optimal_subtree(g, values, 1.0),
                                      np.arange(len(g)))
        self.assertEqual(games.conditional_game(g, values, 1.0), g)

    def test_value_below_k(self):
        g = two_leaves(Player.II)
        with self.assertRaises(games.ValueBelowKException):
            games.conditional_game(g, games.subgame_values(g), 0.5)

    def test_avoidance(self):
        for p in (geometric(q=0.5), grid_model()):
            for seed in range(100):
                g = games.sample_game(p, seed, 4)
                avoid = games.avoidance_game(g)
                self.assertTrue(np.all(games.subgame_values(avoid).values
                                       <= games.subgame_values(g).values))
                zeroed = (g.players == 1) & (g.offspring >= 2)
                self.assertTrue(np.all(avoid.capacities[zeroed] == 0.0))
                np.testing.assert_array_equal(avoid.capacities[~zeroed],
                                              g.capacities[~zeroed])

    def test_avoidance_vacuous(self):
        g = games.sample_game(geometric(q=1.0), 3, 5)
        self.assertEqual(games.avoidance_game(g), g)

    def test_avoidance_law(self):
        # avoidance_game of p-games against games sampled from p'
        p = geometric(l=0.6, q=0.8)
        avoid_law = transforms.avoidance_distribution(p)
        N, t = 3000, 3
        rewritten, direct = [], []
        for j in range(N):
            g = games.avoidance_game(games.sample_game(
                p, rng.stream_seed(0, j), t, model_hash=''))
            h = games.sample_game(avoid_law, rng.stream_seed(1, j), t,
                                  model_hash='')
            for game, rows in ((g, rewritten), (h, direct)):
                rows.append((game.players[0] == 0, game.offspring[0],
                             game.capacities[0] >= 1.0,
                             games.subgame_values(game).root >= 1.0))
        a, b = np.array(rewritten, dtype=float), np.array(direct, dtype=float)
        for column in range(a.shape[1]):
            x, y = a[:, column], b[:, column]
            stderr = math.sqrt(x.var(ddof=1) / N + y.var(ddof=1) / N)
            self.assertLess(abs(x.mean() - y.mean()), 4 * stderr + 1e-12,
                            msg=f'column {column}')
        exact = 1 - vgf.alpha_iterates(avoid_law, 1.0, t)[-1]
        stderr = math.sqrt(exact * (1 - exact) / N)
        self.assertLess(abs(a[:, 3].mean() - exact), 4 * stderr)


class TestSimpleStrategy(unittest.TestCase):

    def test_player_one_optimal(self):
        p = grid_model()
        for seed in range(200):
            g = games.sample_game(p, seed, 4)
            values = games.subgame_values(g)
            if values.root < 0.5:
                continue
            simple = games.simple_strategy(g, Player.I, 0.5, values)
            self.assertGreaterEqual(games.response_value(g, simple), 0.5)

    def test_stays_in_optimal_subtree(self):
        k = 0.5
        left = 0
        for p in (grid_model(), geometric(q=0.5)):
            for seed in range(200):
                g = games.sample_game(p, seed, 4)
                values = games.subgame_values(g)
                if values.root < k:
                    continue
                tree = set(games.optimal_subtree(g, values, k).tolist())
                choice = {}
                for h in g.decision_nodes(Player.I):
                    inside = [j for j, c in enumerate(g.children(h), 1) if c in tree]
                    choice[h] = inside[0] if h in tree else 1
                self.assertGreaterEqual(
                    games.response_value(g, Strategy(Player.I, choice)), k,
                    msg=f'seed={seed}')

                # leaving T* at an I-root lets II hold the value below k
                outside = [j for j, c in enumerate(g.children(0), 1)
                           if c not in tree]
                if g.player(0) is Player.I and outside:
                    left += 1
                    choice[0] = outside[0]
                    self.assertLess(
                        games.response_value(g, Strategy(Player.I, choice)), k,
                        msg=f'seed={seed}')
        self.assertGreater(left, 0)

    def test_youngest(self):
        g = two_leaves(Player.I)
        self.assertEqual(games.simple_strategy(g, Player.I, 0.3).choice, {0: 1})
        self.assertEqual(games.simple_strategy(g, Player.I, 0.5).choice, {0: 2})
        self.assertEqual(games.simple_strategy(g, Player.I, 0.9).choice, {0: 1})
        g = two_leaves(Player.II)
        self.assertEqual(games.simple_strategy(g, Player.II, 0.5).choice, {0: 1})
        self.assertEqual(games.simple_strategy(g, Player.II, 0.2).choice, {0: 1})

    def test_single_node(self):
        g = Game([1], [1.0], [0], [0], truncation_depth=3)
        self.assertEqual(games.simple_strategy(g, Player.II, 0.0).choice, {})

    def test_player_two_trap(self):
        # In the untruncated game every node is worth 0, so the simple
        # strategy always takes the first child.
        for depth in (1, 3, 5):
            g = binary_trap(depth)
            self.assertEqual(games.subgame_values(g).root, 0.0)
            infinite = games.ValueAnnotation(np.zeros(len(g)))
            simple = games.simple_strategy(g, Player.II, 0.0, infinite)
            self.assertTrue(all(j == 1 for j in simple.choice.values()))
            self.assertEqual(games.response_value(g, simple), 1.0)
