"""Seed derivation and generator helpers.

Every random stream in the package is a numpy ``Generator`` (PCG64) seeded
with a 64-bit integer. Child seeds are derived with SplitMix64 so that a
trial's randomness depends only on ``(root_seed, trial_index)`` and never on
scheduling. Changing either algorithm changes every output file, so both are
pinned here.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """Return the next SplitMix64 output for ``state`` (state is advanced by the caller)."""
    z = (state + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix(root_seed: int, index: int) -> int:
    """Derive the ``index``-th child seed of ``root_seed``.

    This is output number ``index + 1`` of a SplitMix64 stream started at
    ``root_seed``, i.e. ``splitmix64(root_seed + index * GOLDEN_GAMMA)``.
    """
    if index < 0:
        raise ValueError("index must be nonnegative")
    return splitmix64((root_seed + index * GOLDEN_GAMMA) & MASK64)


def as_generator(seed) -> np.random.Generator:
    """Accept an int seed, an existing Generator, or None (fresh entropy)."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
