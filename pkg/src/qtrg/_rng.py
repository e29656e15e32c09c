"""Counter-based hashing used for every random draw in the package.

Draws are pure functions of (key, counter), so a point's value or a sampled
index can be recomputed anywhere without storing state. The mixer is the
SplitMix64 finalizer.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

_GOLDEN_U = np.uint64(_GOLDEN)
_M1_U = np.uint64(_M1)
_M2_U = np.uint64(_M2)
_INV53 = 2.0**-53


def mix_int(x: int) -> int:
    z = (x + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def derive_key(*parts: int) -> int:
    """Fold integers (seeds, steps, stream ids) into one 64-bit key."""
    key = 0x5EED
    for p in parts:
        key = mix_int(key ^ (int(p) & _MASK))
    return key


def hash_counters(key: int, counters: np.ndarray) -> np.ndarray:
    """SplitMix64 output for ``key`` at each counter, as uint64."""
    with np.errstate(over="ignore"):
        z = np.asarray(counters, dtype=np.uint64) * _GOLDEN_U + np.uint64(key & _MASK)
        z ^= z >> np.uint64(30)
        z *= _M1_U
        z ^= z >> np.uint64(27)
        z *= _M2_U
        z ^= z >> np.uint64(31)
    return z


def uniform(key: int, counters: np.ndarray) -> np.ndarray:
    """Float64 uniforms in [0, 1) with 53 random bits."""
    return (hash_counters(key, counters) >> np.uint64(11)).astype(np.float64) * _INV53


def uniform_scalar(key: int, counter: int = 0) -> float:
    return float(uniform(key, np.array([counter], dtype=np.uint64))[0])


def below(key: int, counters: np.ndarray, n: int | np.ndarray) -> np.ndarray:
    """Integers uniform in [0, n) for each counter; ``n`` may be per-counter."""
    u = uniform(key, counters)
    n = np.asarray(n, dtype=np.int64)
    out = np.floor(u * n).astype(np.int64)
    # u*n can round up to n only when n exceeds 2**52
    return np.minimum(out, n - 1)


# Additive recurrence constants 2**64 / g and 2**64 / g**2 for the plastic
# number g, the root of x**3 = x + 1. Consecutive counters then fill the unit
# square with low discrepancy.
_PLASTIC = 1.324717957244746025960908854478
_R2_A1 = np.uint64(int(2**64 / _PLASTIC))
_R2_A2 = np.uint64(int(2**64 / _PLASTIC**2))


def lattice2(key: int, counters: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Point pairs in (0, 1)^2 from a randomly shifted R2 sequence.

    The shift comes from ``key``; each pair depends only on its counter, so
    access stays random and stateless like :func:`uniform`.
    """
    shift = hash_counters(key, np.arange(2, dtype=np.uint64))
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z1 = c * _R2_A1 + shift[0]
        z2 = c * _R2_A2 + shift[1]
    u1 = ((z1 >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    u2 = ((z2 >> np.uint64(11)).astype(np.float64) + 0.5) * _INV53
    return u1, u2
