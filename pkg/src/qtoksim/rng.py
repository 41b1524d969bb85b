"""Deterministic random streams keyed by (seed, stream_id).

Every stochastic operation in the simulator draws from an RngStream so that
identical (seed, stream_id) pairs reproduce identical results bit for bit.
Derived substreams let parallel trials stay independent and reproducible.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _mix64(a: int, b: int) -> int:
    # Two splitmix rounds; collision odds over realistic stream counts are
    # negligible (birthday bound on 64 bits).
    return _splitmix64(_splitmix64(a) ^ ((b + 1) * _GOLDEN & _MASK64))


class RngStream:
    """A named stream of randomness: (seed, stream_id) -> generator.

    The underlying generator is stateful; construct a fresh RngStream to
    replay a sequence. ``substream(key)`` derives an independent stream
    deterministically, so per-trial or per-node streams never overlap.
    """

    __slots__ = ("seed", "stream_id", "generator")

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        self.generator = np.random.default_rng((self.seed, self.stream_id))

    def substream(self, key: int) -> "RngStream":
        return RngStream(self.seed, _mix64(self.stream_id, int(key)))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"
