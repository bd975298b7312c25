"""Order-independent per-item random streams.

Every random draw is keyed by ``(global seed, stable item id, purpose)``,
so results do not depend on processing order or worker count.
"""
from __future__ import annotations

import hashlib

import numpy as np


def speaker_seed(global_seed: int, speaker_id: str, *tags: str) -> int:
    key = "\x1f".join([str(int(global_seed)), str(speaker_id), *map(str, tags)])
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed))
