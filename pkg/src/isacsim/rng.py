"""Deterministic random-stream derivation.

Every stochastic quantity in the simulator draws from its own substream,
keyed by (master seed, purpose, indices). Substreams are independent of
evaluation order and of how episodes are chunked across threads, which is
what makes multi-threaded runs byte-identical to single-threaded ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["purpose_code", "substream", "spawn_rng"]


def purpose_code(purpose: str) -> int:
    """Stable 32-bit code for a purpose label (process-independent)."""
    digest = hashlib.blake2s(purpose.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def substream(master_seed: int, purpose: str, *indices: int) -> np.random.SeedSequence:
    """SeedSequence for one logical draw site."""
    if master_seed < 0:
        raise ValueError(f"master seed must be non-negative, got {master_seed}")
    return np.random.SeedSequence(
        entropy=(int(master_seed), purpose_code(purpose), *map(int, indices))
    )


def spawn_rng(master_seed: int, purpose: str, *indices: int) -> np.random.Generator:
    """Generator seeded from the (seed, purpose, indices) substream."""
    return np.random.default_rng(substream(master_seed, purpose, *indices))
