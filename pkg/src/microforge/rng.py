"""Counter-based splittable random streams.

Every stochastic operation draws from a :class:`RandomStream`, which is a
(seed, stream_id) pair backing a Philox counter-based generator.  Identical
pairs replay identical draw sequences; distinct stream ids give statistically
independent sequences.  Streams for sub-entities (points, chunks, rings,
slices, replicates) are derived with :meth:`RandomStream.child` keyed by the
entity index, so results never depend on thread count or evaluation order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 mixing step (64-bit avalanche)."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def _tag_to_u64(tag: int | str) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag) & _MASK64
    if isinstance(tag, str):
        # blake2b, not hash(): Python string hashing is salted per process.
        digest = hashlib.blake2b(tag.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    raise TypeError(f"stream tag must be int or str, got {type(tag).__name__}")


@dataclass(frozen=True)
class RandomStream:
    """A reproducible, splittable source of randomness.

    The (seed, stream_id) pair is the full 128-bit Philox key, so two streams
    with the same seed but different ids are independent by construction.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = (self.seed << 64) | self.stream_id
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, *tags: int | str) -> "RandomStream":
        """Derive a sub-stream keyed by entity tags (ints or strings).

        Derivation is a pure function of (stream_id, tags); the draw order of
        siblings never matters.
        """
        sid = self.stream_id
        for tag in tags:
            sid = splitmix64(splitmix64(sid) + _tag_to_u64(tag))
        return RandomStream(self.seed, sid)
