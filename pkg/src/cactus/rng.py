"""Seed handling.

All randomness goes through numpy's ``PCG64`` bit generator.  A replica's
stream is derived from the master seed, a per-experiment stream number and
the replica index with ``SeedSequence(master_seed, spawn_key=(stream, index))``,
so a replica's output does not depend on which worker runs it or in what order.
"""

from __future__ import annotations

import numpy as np

GENERATOR_NAME = "numpy.random.PCG64"
SEED_DERIVATION = "SeedSequence(entropy=seed, spawn_key=(stream, replica))"

MAX_SEED = 2**64 - 1


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


def make_rng(seed: int, *spawn_key: int) -> np.random.Generator:
    """Generator for ``seed``, optionally specialised by ``spawn_key``."""
    ss = np.random.SeedSequence(check_seed(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(ss))


def replica_rng(seed: int, replica: int, stream: int = 0) -> np.random.Generator:
    return make_rng(seed, stream, replica)


def as_rng(rng) -> np.random.Generator:
    """Accept a Generator, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return make_rng(int(rng))


def uniform_below(rng: np.random.Generator, n: int) -> int:
    """Uniform integer in ``[0, n)`` for arbitrarily large Python ints."""
    if n <= 0:
        raise ValueError("n must be positive")
    if n < 2**62:
        return int(rng.integers(n))
    nbits = n.bit_length()
    nbytes = (nbits + 7) // 8
    while True:
        r = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - nbits)
        if r < n:
            return r
