"""Deterministic, splittable random number generation.

Every random decision in this library flows through :class:`Rng`, a
SplitMix64 generator.  Streams are derived from three integers
``(global_seed, stream_id, item_index)`` so that independent work items
(e.g. images in a corpus) get independent streams that do not depend on
processing order or thread count.

The SplitMix64 finalizer used throughout (``mix64``) is, with all
arithmetic modulo 2**64::

    x ^= x >> 30;  x *= 0xBF58476D1CE4E5B9
    x ^= x >> 27;  x *= 0x94D049BB133111EB
    x ^= x >> 31

and the stream seed is ``mix64(global_seed ^ mix64(stream_id) ^
mix64(item_index))``.  Output ``i`` (1-based) of a stream with state ``s``
is ``mix64(s + i * 0x9E3779B97F4A7C15)``, which is what the vectorized
helpers below compute directly.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def mix64(x: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijective scrambling of ``x``."""
    x &= _MASK64
    x ^= x >> 30
    x = (x * _MIX_A) & _MASK64
    x ^= x >> 27
    x = (x * _MIX_B) & _MASK64
    x ^= x >> 31
    return x


def derive_state(global_seed: int, stream_id: int = 0, item_index: int = 0) -> int:
    """Initial SplitMix64 state for the stream named by the three inputs."""
    return mix64((global_seed & _MASK64) ^ mix64(stream_id) ^ mix64(item_index))


class Rng:
    """SplitMix64 stream with uniform / integer / sign / shuffle helpers.

    Identical derivation inputs produce identical streams on every
    platform; this is the library's reproducibility contract.
    """

    __slots__ = ("state",)

    def __init__(self, state: int) -> None:
        self.state = state & _MASK64

    @classmethod
    def derive(cls, global_seed: int, stream_id: int = 0, item_index: int = 0) -> "Rng":
        return cls(derive_state(global_seed, stream_id, item_index))

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return mix64(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi], unbiased."""
        if hi < lo:
            raise ValueError(f"empty integer range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            u = self.next_u64()
            if u < limit:
                return lo + (u % span)

    def sign(self) -> int:
        """Uniform random sign, +1 or -1."""
        return 1 if self.next_u64() & 1 else -1

    def choice(self, seq):
        return seq[self.randint(0, len(seq) - 1)]

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]


def stream_u64(state: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized SplitMix64: outputs ``offset+1 .. offset+count`` of the
    stream whose state is ``state``.

    Bit-identical to repeated ``Rng(state).next_u64()`` calls; used where
    large random fields (noise images) would make the scalar path slow.
    """
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    x = np.uint64(state & _MASK64) + idx * np.uint64(_GOLDEN)
    x ^= x >> np.uint64(30)
    x *= np.uint64(_MIX_A)
    x ^= x >> np.uint64(27)
    x *= np.uint64(_MIX_B)
    x ^= x >> np.uint64(31)
    return x


def stream_floats(state: int, count: int, offset: int = 0) -> np.ndarray:
    """Vectorized uniforms in [0, 1), matching ``Rng.random()`` draws."""
    return (stream_u64(state, count, offset) >> np.uint64(11)).astype(np.float64) * 2.0**-53


def stream_normals(state: int, count: int) -> np.ndarray:
    """Standard normals via Box-Muller over the vectorized uniform stream.

    Consumes 2*ceil(count/2) uniforms; deterministic for a given state.
    """
    pairs = (count + 1) // 2
    u = stream_floats(state, 2 * pairs)
    u1 = u[:pairs]
    u2 = u[pairs:]
    # 1 - u1 is in (0, 1], keeping log() finite.
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
    return z[:count]
