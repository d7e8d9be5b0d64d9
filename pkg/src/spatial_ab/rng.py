"""Counter-based splittable random numbers.

Treatment coins are keyed by (seed, day, randomization unit, interval), so any
single coin can be regenerated without replaying a sequential stream.  That
keeps assignment tensors reproducible and order-independent when replications
run in parallel.

The construction is a chain of SplitMix64 finalizer rounds: absorb one word,
mix, absorb the next.  The finalizer is bijective on uint64 with strong
avalanche, which is plenty for simulation-grade coins.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    # SplitMix64 finalizer. uint64 arithmetic wraps by design.
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def _as_words(value) -> np.ndarray:
    arr = np.asarray(value)
    if arr.dtype == np.uint64:
        return arr
    if not np.issubdtype(arr.dtype, np.integer):
        raise TypeError(f"hash words must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64).astype(np.uint64)


def fold(state, word) -> np.ndarray:
    """Absorb one word into a hash state (broadcasts over arrays)."""
    with np.errstate(over="ignore"):
        return _mix(np.asarray(state, dtype=np.uint64) ^ (_as_words(word) + _GOLDEN))


def keyed_bits(seed: int, *words) -> np.ndarray:
    """Hash (seed, word_1, ..., word_k) to uint64 bits, broadcasting words."""
    state = _mix(np.asarray(int(seed) & _MASK64, dtype=np.uint64) + _GOLDEN)
    for w in words:
        state = fold(state, w)
    return state


def keyed_uniform(seed: int, *words) -> np.ndarray:
    """Uniform[0,1) draws keyed by (seed, *words); pure and order-free."""
    bits = keyed_bits(seed, *words)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(seed: int, *words) -> int:
    """Derive a 64-bit substream seed from a master seed and integer words."""
    return int(keyed_bits(seed, *[np.asarray(w) for w in words]))
