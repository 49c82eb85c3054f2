"""Seeded random streams.

Every sampling routine takes an explicit ``numpy.random.Generator``. Per-user
streams are derived from ``(seed, user_id)`` through a stable hash, so a replay
with the same seed reproduces each user's draws regardless of iteration order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_hash64(*parts: str) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        data = part.encode("utf-8")
        h.update(len(data).to_bytes(4, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


def user_stream(seed: int, user_id: str, *scope: str) -> np.random.Generator:
    """Independent generator for one user (optionally namespaced by ``scope``)."""
    key = stable_hash64(user_id, *scope)
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, key])


def make_rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)
