"""SplitMix64 byte streams for portable, seeded inputs.

Output ``i`` (from 0) of the stream for ``seed`` is ``mix(seed + (i + 1) * GAMMA)``
with all arithmetic modulo 2**64, where ``mix`` is the SplitMix64 finaliser.
Bytes are the outputs in order, each little-endian.  Independent streams use
``seed + stream * STREAM_STEP`` as their seed.
"""
from __future__ import annotations

import numpy as np

GAMMA = 0x9E3779B97F4A7C15
STREAM_STEP = 0xD1B54A32D192ED03
_MASK = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the stream for ``seed`` as ``uint64``."""
    i = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.uint64(seed & _MASK) + i * np.uint64(GAMMA)
        return _mix(state)


def random_bytes(seed: int, nbytes: int, stream: int = 0) -> np.ndarray:
    s = (seed + stream * STREAM_STEP) & _MASK
    words = splitmix64(s, -(-nbytes // 8))
    return words.astype("<u8").view(np.uint8)[:nbytes].copy()
