"""Deterministic RNG stream derivation.

Every stochastic step derives its own child stream from a master seed plus a
string tag, so adding or reordering steps never perturbs unrelated draws and
reruns with the same seed reproduce results bit for bit.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["derive_seed_sequence", "derive_rng", "derive_seed"]


def _tag_words(tags: tuple) -> list[int]:
    words = []
    for tag in tags:
        if isinstance(tag, str):
            words.append(zlib.crc32(tag.encode("utf-8")))
        elif isinstance(tag, (int, np.integer)):
            words.append(int(tag) & 0xFFFFFFFF)
        else:
            raise TypeError(f"seed tags must be str or int, got {type(tag).__name__}")
    return words


def derive_seed_sequence(master_seed: int, *tags) -> np.random.SeedSequence:
    """Build a child SeedSequence keyed by the master seed and tag path."""
    return np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF] + _tag_words(tags))


def derive_rng(master_seed: int, *tags) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *tags)."""
    return np.random.Generator(np.random.PCG64(derive_seed_sequence(master_seed, *tags)))


def derive_seed(master_seed: int, *tags) -> int:
    """Stable 32-bit integer seed for the stream identified by the tags."""
    return int(derive_seed_sequence(master_seed, *tags).generate_state(1, np.uint32)[0])
