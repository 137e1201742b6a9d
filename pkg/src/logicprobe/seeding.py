"""Deterministic RNG derivation.

Every randomized component draws from a numpy Generator derived from a
root seed plus a string/int path, hashed through SHA-256. Independent
paths give independent streams, identical paths give identical streams,
on every platform and regardless of hash randomization.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *path: int | str) -> int:
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(root_seed: int, *path: int | str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(derive_seed(root_seed, *path)))
