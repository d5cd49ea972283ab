"""Seed derivation.

Every random stream is a PCG64 generator seeded from
``SeedSequence(entropy=master_seed, spawn_key=key)``. The key is a tuple of
small integers: a stream tag followed by counters (trial index, ...). Streams
therefore depend only on ``(master_seed, key)``, never on the order in which
they are created, which keeps chunked or threaded runs bit-identical.
"""

import numpy as np

# stream tags, first element of every spawn key
PARTICLE = 1
TRIAL = 2


def seed_sequence(master_seed, *key):
    if isinstance(master_seed, np.random.SeedSequence):
        if key:
            raise TypeError("cannot extend the key of an existing SeedSequence")
        return master_seed
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))


def generator(master_seed, *key):
    """Return ``np.random.Generator(PCG64)`` for ``(master_seed, *key)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *key)))


def trial_seed(master_seed, index):
    """Seed of Monte Carlo trial ``index`` under ``master_seed``."""
    return seed_sequence(master_seed, TRIAL, index)
