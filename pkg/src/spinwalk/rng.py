"""Reproducible stream derivation for replica-parallel Monte Carlo.

Every replica k of a run gets its own generator, derived from
(seed, tag, k) by the splitmix64 finite-state mix below. The derivation is
pure 64-bit integer arithmetic, so streams are bit-identical across
platforms and independent of how replicas are scheduled over threads.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One output of the splitmix64 mixer (public-domain constants)."""
    z = (state + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def _tag_hash(tag: str) -> int:
    # FNV-1a over the UTF-8 bytes of the tag
    h = 0xCBF29CE484222325
    for byte in tag.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & _MASK
    return h


def derive_key(seed: int, tag: str, k: int = 0) -> int:
    """64-bit stream key for replica k of the run (seed, tag)."""
    state = splitmix64(seed & _MASK)
    state = splitmix64(state ^ _tag_hash(tag))
    state = splitmix64(state ^ (k & _MASK))
    return state


def stream(seed: int, tag: str, k: int = 0) -> np.random.Generator:
    """Generator for replica k; distinct (seed, tag, k) give distinct streams."""
    return np.random.Generator(np.random.PCG64(derive_key(seed, tag, k)))


def streams(seed: int, tag: str, n: int, start: int = 0):
    """Generators for replicas start..start+n-1."""
    return [stream(seed, tag, k) for k in range(start, start + n)]
