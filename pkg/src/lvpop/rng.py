"""Random number streams.

All simulation randomness comes from numpy's ``PCG64`` bit generator (128-bit
state, 64-bit output) wrapped in ``numpy.random.Generator``.  The same
generator object is passed into the jitted kernels, so Python-level and
compiled draws share one stream.

Per-trial seeds are derived with SplitMix64: trial ``i`` of a batch with base
seed ``s`` gets the ``(i+1)``-th output of a SplitMix64 generator started at
``s``, i.e. ``mix64(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)``.  ``mix64`` is
a bijection on 64-bit words and the golden-ratio increment is odd, so distinct
indices under one base seed always map to distinct seeds.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """SplitMix64 output function (Stafford variant 13)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def seed_for_trial(base_seed: int, index: int) -> int:
    if index < 0:
        raise ValueError("trial index must be non-negative")
    return mix64((int(base_seed) + (int(index) + 1) * GOLDEN_GAMMA) & MASK64)


def make_rng(seed) -> np.random.Generator:
    """A ``Generator(PCG64(seed))``; generators are passed through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))
