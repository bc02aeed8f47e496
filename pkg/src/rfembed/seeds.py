"""Deterministic seed derivation.

Every random draw in the toolkit comes from a numpy Generator seeded through
derive_seed, so a run is fully reproducible from one master seed. Derivation
uses a splitmix64-style 64-bit mixer over the master seed and a sequence of
integer indices (protocol id, epoch, instance index, stream tag).
"""

import numpy as np

_MASK64 = (1 << 64) - 1

# fixed stream tags keep independent consumers from colliding on the same index
PROTOCOL_STREAM = 0x50524F54
INSTANCE_STREAM = 0x494E5354
TRAIN_STREAM = 0x5452414E
EVAL_STREAM = 0x4556414C


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_seed(master_seed, *indices):
    """Mix a master seed with integer indices into a new 64-bit seed."""
    state = _splitmix64(int(master_seed) & _MASK64)
    for ix in indices:
        state = _splitmix64(state ^ _splitmix64(int(ix) & _MASK64))
    return state


def rng_for(master_seed, *indices):
    """Generator seeded from derive_seed(master_seed, *indices)."""
    return np.random.default_rng(derive_seed(master_seed, *indices))
