"""Deterministic 64-bit counter-based PRNG used for all sampling.

The generator is SplitMix64: state advances by the golden-ratio constant
0x9E3779B97F4A7C15 each step and the output is a bijective bit-mix of the
state (Steele, Lea & Flood 2014). It is trivially portable, so selections
reproduce bit-for-bit on any platform or implementation of this engine.

Sub-streams are derived, not split: the stream for (seed, class_index) is
seeded with ``mix64(seed) XOR mix64(0xC2B2AE3D27D4EB4F * (class_index + 1))``,
which decorrelates classes and makes each class draw independent of class
iteration order.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0xC2B2AE3D27D4EB4F


def mix64(z: int) -> int:
    """SplitMix64 finalizer: bijective avalanche mix of a 64-bit word."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Minimal SplitMix64 stream over python ints (no numpy state)."""

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via power-of-two rejection (unbiased)."""
        if n <= 0:
            raise ValueError("next_below requires n >= 1")
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.next_u64() & mask
            if r < n:
                return r

    def next_double(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def class_stream(seed: int, class_index: int) -> SplitMix64:
    """Independent sub-stream for one (run seed, class index) pair."""
    key = mix64(seed & _MASK64) ^ mix64((_STREAM_SALT * (class_index + 1)) & _MASK64)
    return SplitMix64(key)


def sample_without_replacement(stream: SplitMix64, pool: list[int], k: int) -> list[int]:
    """Draw k distinct items from pool by partial Fisher-Yates shuffle.

    The pool is copied; the draw order is the first k slots of the shuffle,
    so the result for a given stream state is fully determined.
    """
    n = len(pool)
    if not 0 <= k <= n:
        raise ValueError(f"cannot draw {k} items from a pool of {n}")
    work = list(pool)
    for i in range(k):
        j = i + stream.next_below(n - i)
        work[i], work[j] = work[j], work[i]
    return work[:k]
