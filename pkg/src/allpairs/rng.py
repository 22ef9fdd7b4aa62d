"""Small deterministic hashing/sampling helpers.

Stage costs and synthetic payloads must be functions of (seed, keys) alone,
never of call order, so that every execution mode sees the same values.
Python's builtin hash() is salted per process, hence the explicit mixer.
"""

from __future__ import annotations

import math

_M64 = (1 << 64) - 1


def mix64(*values: int) -> int:
    """Mix integers into a well-distributed 64-bit value (splitmix64 rounds)."""
    x = 0x9E3779B97F4A7C15
    for v in values:
        x = (x + (v & _M64) + 0x9E3779B97F4A7C15) & _M64
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _M64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _M64
        x ^= x >> 31
    return x


def uniform01(seed: int, stream: int = 0) -> float:
    """Deterministic uniform draw in (0, 1)."""
    return (mix64(seed, stream) + 1) / float((1 << 64) + 2)


def normal01(seed: int) -> float:
    """Deterministic standard-normal draw (Box-Muller)."""
    u1 = uniform01(seed, 1)
    u2 = uniform01(seed, 2)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
