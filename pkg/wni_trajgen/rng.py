"""
Seeded random streams.

Every stochastic component receives its own generator derived from the master
seed and a stable key, so results never depend on execution order.
"""

import hashlib
from typing import Union

import numpy as np

Key = Union[int, float, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, int):
        return key
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    entropy = [int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
