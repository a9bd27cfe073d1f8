"""Keyed random streams.

Every stream is a Philox generator whose key is derived from the master
seed and a tuple of integers (generation, block, tag, ...).  Work is cut
into fixed blocks of output indices, so the numbers a block sees do not
depend on how blocks are spread over threads.
"""
from __future__ import annotations

import numpy as np

BLOCK = 1 << 16

# stream tags
INDEX_I = 1
INDEX_J = 2
THETA = 3
COMPONENT = 4
INIT = 5
LEAF = 6
CHOICE = 7


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def blocks(n: int, size: int = BLOCK):
    """(block index, start, stop) triples covering range(n)."""
    return [(b, lo, min(lo + size, n)) for b, lo in enumerate(range(0, n, size))]
