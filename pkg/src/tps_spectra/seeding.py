"""Deterministic seed derivation for trials, starts, and equivalence searches."""

import numpy as np


def derive_seed(master: int, *path: int) -> int:
    """A 64-bit seed that is a pure function of (master, path indices)."""
    entropy = [int(master) & 0xFFFFFFFF] + [int(p) & 0xFFFFFFFF for p in path]
    state = np.random.SeedSequence(entropy).generate_state(2)
    return (int(state[0]) << 32) | int(state[1])


def rng_for(master: int, *path: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))
