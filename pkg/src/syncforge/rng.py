"""Counter-based pseudo-random numbers for reproducible experiments.

A splitmix64 output function applied to (seed, counter) gives a stateless
64-bit stream that is identical on every platform; Gaussian variates come from
the Box-Muller transform.  Nothing here depends on global state.
"""

from __future__ import annotations

import numpy as np

__all__ = ["uniform64", "standard_normal"]

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def uniform64(seed: int, count: int, start: int = 0) -> np.ndarray:
    """`count` raw 64-bit words of the stream for `seed`, from index `start`."""
    if count < 0:
        raise ValueError("count must be >= 0")
    idx = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + (idx + np.uint64(1)) * _GAMMA
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        z = z ^ (z >> np.uint64(31))
    return z


def standard_normal(seed: int, count: int) -> np.ndarray:
    """`count` i.i.d. standard normal variates, deterministic in `seed`."""
    pairs = (count + 1) // 2
    words = uniform64(seed, 2 * pairs)
    # 53-bit mantissas mapped into (0, 1]; u1 > 0 keeps the log finite.
    u1 = ((words[:pairs] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
    u2 = (words[pairs:] >> np.uint64(11)).astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]
