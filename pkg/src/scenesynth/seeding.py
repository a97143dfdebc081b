"""Deterministic 64-bit seed derivation.

Every random decision in the engine is drawn from a generator seeded by
``derive(master_seed, stream, index)``. The formula is deliberately simple
so it can be re-implemented elsewhere::

    splitmix64(master ^ splitmix64(STREAM[stream] ^ splitmix64(index)))

with all arithmetic modulo 2**64.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

STREAMS = {
    "scene": 0x5CE7E,
    "bg": 0xB6,
    "fg": 0xF6,
    "mix": 0x313,
    "placement": 0x91AC,
    "preview": 0x9E1,
}

DERIVATION_DOC = "splitmix64(master ^ splitmix64(stream ^ splitmix64(index))), mod 2^64"


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive(master: int, stream: str | int, index: int) -> int:
    tag = STREAMS[stream] if isinstance(stream, str) else stream
    inner = splitmix64((tag & MASK64) ^ splitmix64(index & MASK64))
    return splitmix64((master & MASK64) ^ inner)


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & MASK64))


def child_seed(gen: np.random.Generator) -> int:
    """Draw a fresh 64-bit seed from a generator."""
    return int(gen.integers(0, 2**64, dtype=np.uint64))
