"""Deterministic key mixing for the scripted backend.

All pseudo-randomness in the simulator is derived from integer keys via a
splitmix64-style mixer, so identical inputs give identical draws across
processes and platforms (the builtin ``hash`` is salted and unusable here).
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GAMMA) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _as_int(part: int | str) -> int:
    if isinstance(part, str):
        digest = hashlib.blake2b(part.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    return part & _MASK


def mix(*parts: int | str) -> int:
    """Combine integer/string parts into one 64-bit value."""
    state = 0x6A09E667F3BCC908
    for part in parts:
        state = _splitmix64(state ^ _as_int(part))
    return state


def unit_from(*parts: int | str) -> float:
    """Deterministic draw in [0, 1) keyed by ``parts``."""
    return mix(*parts) / 2.0**64


def unit_grid(key: int, rows: int, cols: int) -> np.ndarray:
    """Deterministic (rows, cols) array of draws in [0, 1) keyed per cell.

    Cell (r, c) depends only on (key, r, c), matching what repeated
    ``unit_from(key, r, c)`` calls would produce structurally (not value-wise;
    this is an independent vectorized stream).
    """
    r = np.arange(rows, dtype=np.uint64)[:, None]
    c = np.arange(cols, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        x = (np.uint64(key) ^ (r * np.uint64(0x9E3779B97F4A7C15))) ^ (
            c * np.uint64(0xC2B2AE3D27D4EB4F)
        )
        x = (x + np.uint64(_GAMMA)) & np.uint64(_MASK)
        z = x
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z.astype(np.float64) / 2.0**64


def unit_direction(seed: int, dim: int) -> np.ndarray:
    """Deterministic unit vector of length ``dim`` keyed by ``seed``."""
    rng = np.random.default_rng(mix(seed, "direction"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def ms_key(seconds: float) -> int:
    """Quantize a time to whole milliseconds for stable keying."""
    return int(round(seconds * 1000.0))
