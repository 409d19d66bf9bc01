"""Deterministic random substreams for reproducible parallel simulation.

Each (master seed, lane, index) triple selects a disjoint 2^128-draw counter
range of one Philox stream, so run r's randomness is a pure function of
(master_seed, r) and results are identical however the work is scheduled.
"""

from functools import lru_cache

import numpy as np

RUN_LANE = 0
REPLICATION_LANE = 1


@lru_cache(maxsize=64)
def _philox_key(master_seed: int) -> tuple[int, int]:
    state = np.random.SeedSequence(master_seed).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def substream(master_seed: int, index: int, lane: int = 0) -> np.random.Generator:
    """Generator for one substream; counter word 0 is the one that increments."""
    key = np.array(_philox_key(master_seed), dtype=np.uint64)
    counter = np.array([0, 0, lane, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
