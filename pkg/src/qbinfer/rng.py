"""Seeded randomness built on the counter-based Philox generator.

One stream per (seed, spawn key): trajectory step ``i`` always consumes the
``i``-th uniform of its stream, so a step's draw is a pure function of the
seed and the step index, and parallel replicas decorrelate by spawn key.
"""

from __future__ import annotations

import numpy as np


def generator(seed: int, spawn_key: tuple[int, ...] = ()) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(seq))


def step_uniforms(seed: int, n: int, spawn_key: tuple[int, ...] = ()) -> np.ndarray:
    """The first n uniforms of the stream; entry i drives step i."""
    return generator(seed, spawn_key).random(n)


def replica_seed(seed: int, replica: int) -> int:
    """Derived 63-bit seed for an independent replica."""
    state = np.random.SeedSequence(entropy=int(seed), spawn_key=(replica,))
    return int(state.generate_state(1, dtype=np.uint64)[0] >> 1)
