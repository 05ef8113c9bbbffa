"""Randomness keyed by node paths.

Every node of a sampled game owns a `np.random.SeedSequence` whose spawn key is
its path of child ordinals from the root; its uniforms come from a generator
seeded with that sequence. A node's draw therefore depends only on the game
seed and its path, so deepening the truncation extends a game instead of
resampling it, and lazy depth-first evaluation sees exactly the nodes
breadth-first sampling builds.

Game `j` of an experiment is seeded from the master seed's sequence spawned at
`j`; seeds are non-negative integers.
"""

import numpy as np  # type: ignore


def root_key(seed):
    return np.random.SeedSequence(seed)


def child_key(key, j):
    """Key of the `j`-th child (1-based) of the node with `key`."""
    return np.random.SeedSequence(key.entropy, spawn_key=key.spawn_key + (j,))


def path_key(seed, path):
    """Key of the node reached by child ordinals `path` from the root."""
    return np.random.SeedSequence(seed, spawn_key=tuple(path))


def uniforms(key, n):
    """`n` uniforms in [0, 1) owned by the node with `key`."""
    return np.random.default_rng(key).random(n).tolist()


def stream_seed(master_seed, j):
    """Seed of the `j`-th game of an experiment."""
    state = np.random.SeedSequence(master_seed, spawn_key=(j,)).generate_state(
        1, np.uint64)
    return int(state[0])
