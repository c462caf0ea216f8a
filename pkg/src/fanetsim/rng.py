"""SplitMix64 random streams.

Each stream is a counter-based generator: the k-th output is a fixed mixing
function of ``key + k * GAMMA``, so the sequence depends only on the 64-bit key.
Keys are derived from the scenario seed and a stream label, which keeps e.g.
mobility trajectories unaffected by how many draws the ABC optimizer makes.
"""
from __future__ import annotations

import hashlib

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

STREAM_LABELS = ("mobility", "traffic", "abc", "ann", "loss")


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _label_hash(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


class RandomStream:
    """Deterministic stream of 64-bit values and floats in [0, 1)."""

    __slots__ = ("stream_id", "key", "counter")

    def __init__(self, seed: int, stream_id: str):
        self.stream_id = stream_id
        self.key = mix64((seed & MASK64) ^ _label_hash(stream_id))
        self.counter = 0

    def next_u64(self) -> int:
        self.counter += 1
        return mix64((self.key + self.counter * GAMMA) & MASK64)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange requires n > 0")
        # Lemire-style multiply-shift; bias is < n / 2**64
        return (self.next_u64() * n) >> 64

    def split(self, label: str) -> "RandomStream":
        """Independent child stream, e.g. one mobility stream per node."""
        child = RandomStream.__new__(RandomStream)
        child.stream_id = f"{self.stream_id}/{label}"
        child.key = mix64(self.key ^ _label_hash(label))
        child.counter = 0
        return child


def rng_next(stream: RandomStream) -> float:
    return stream.random()


def make_streams(seed: int) -> dict[str, RandomStream]:
    return {label: RandomStream(seed, label) for label in STREAM_LABELS}
