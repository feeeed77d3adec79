"""Deterministic derivation of independent random streams.

Every stream is a PCG64 generator seeded from a ``SeedSequence`` built on the
master seed plus a key path, so the stream for (seed, key...) never depends on
how many streams were drawn before it or on which worker draws it.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _key_word(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"stream keys must be non-negative, got {key}")
        return int(key)
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_seed_sequence(seed: int, *keys) -> np.random.SeedSequence:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence([int(seed), *(_key_word(k) for k in keys)])


def derive_rng(seed: int, *keys) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(seed, *keys)))


def derive_int(seed: int, *keys) -> int:
    """A 63-bit child seed, for handing to code that takes an integer seed."""
    return int(derive_seed_sequence(seed, *keys).generate_state(2, np.uint64)[0] >> np.uint64(1))
