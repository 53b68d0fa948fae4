"""Seeded random streams.

All randomness in a run is derived from a single 64-bit seed plus a stream
name, so adding a consumer to one stream never perturbs the others.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _stream_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for (seed, name); stable across runs."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _MASK64, _stream_key(name)]))
