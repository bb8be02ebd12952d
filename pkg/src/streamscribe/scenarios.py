"""Synthetic utterance scripts for runs, profiling, and tests."""

from __future__ import annotations

import numpy as np

from ._mix import mix
from .core import ScriptWord, UtteranceScript

_CHUNK_GUARD_S = 300.0
# Trailing silence so the final word clears the edge-instability margin.
_TAIL_S = 0.5


def generate_script(
    n_words: int,
    duration_s: float,
    seed: int,
    stability: float = 1.0,
) -> UtteranceScript:
    """Pseudo-random word timeline: word lengths 0.2-0.6 s, short intra-phrase
    gaps with occasional sentence pauses. Deterministic per seed."""
    if n_words < 1:
        raise ValueError("need at least one word")
    rng = np.random.default_rng(mix(seed, "scenario"))
    words: list[ScriptWord] = []
    t = 0.1 + 0.2 * rng.random()
    since_pause = 0
    for _ in range(n_words):
        length = 0.2 + 0.4 * rng.random()
        boundary = (int(t / _CHUNK_GUARD_S) + 1) * _CHUNK_GUARD_S
        if t < boundary < t + length:
            t = boundary  # never straddle a chunk boundary
        n_letters = int(3 + rng.integers(0, 6))
        text = "".join(chr(ord("a") + int(c)) for c in rng.integers(0, 26, n_letters))
        words.append(ScriptWord(text, round(t, 3), round(t + length, 3), stability))
        since_pause += 1
        if since_pause >= 8 + rng.integers(0, 7):
            gap = 0.35 + 0.15 * rng.random()
            since_pause = 0
        else:
            gap = 0.05 + 0.2 * rng.random()
        t = t + length + gap
    total = max(duration_s, words[-1].end + _TAIL_S)
    return UtteranceScript(words=tuple(words), total_duration=total, seed=seed)


def standard_scenario(
    duration_s: float = 60.0, seed: int = 42, stability: float = 0.8
) -> UtteranceScript:
    """The 60-second scenario used for beam statistics and speedup checks."""
    # ~2.2 words/second fills the requested duration.
    return generate_script(
        n_words=int(duration_s * 2.2), duration_s=duration_s, seed=seed, stability=stability
    )
