"""Seeded random streams.

Every consumer of randomness asks for a stream by a path of integers, e.g.
``stream(seed, SHUFFLE, epoch)``.  Streams are Philox generators keyed through
``SeedSequence`` spawn keys, so they are independent of the order in which
they are requested and a run is reproducible from the master seed alone.
"""

import numpy as np

INIT = 1
SHUFFLE = 2
AUGMENT = 3
DROPOUT = 4
SEARCH = 5
SPLIT = 6
SYNTH = 7

MASK64 = (1 << 64) - 1


def stream(seed, *path):
    seq = np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
