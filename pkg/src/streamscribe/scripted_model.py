"""Deterministic scripted model backend.

Implements the model interface (encode, prefill, decode_step,
decode_cross_attention) from a ground-truth word timeline. The backend
reproduces the serving phenomena that matter to the runtime: instability of
words near the sliding-window edges, window-relative timestamp tokens,
hallucination on under-padded input, and clean termination otherwise.

All outputs are pure functions of (script, window, policy, seed, prefix);
see the keying scheme in ``_mix``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field

import numpy as np

from ._mix import mix, ms_key, unit_direction, unit_from, unit_grid
from .core import (
    Hypothesis,
    InputPolicy,
    Token,
    TokenKind,
    UtteranceScript,
    special_token,
    timestamp_token,
)
from .costmodel import HushWord, effective_tokens, hush_validity

# Words whose start/end sit within this margin of a moving window edge decode
# unstably across rounds.
EDGE_MARGIN_S = 0.3
# A trimmed window start cuts into the leading word's acoustic context; the
# greedy surface there wobbles per round at this rate regardless of the
# word's own edge stability (which governs the window-end margin).
TRIM_EDGE_CORRUPT_P = 0.45

# Calibration constants: the -0.05/-3.0 gap with a -1.75 per-token penalty on
# off-path continuations guarantees width-5 search recovers the model's word
# whenever a single token is unstable (the shortest continuation after any
# text token is 2 tokens, and 2 * (1.75 - 0.05) > 3.0 - 0.05).
TOP_LOGPROB = -0.05
COMPETITOR_LOGPROB = -3.0
DEVIATED_LOGPROB = -1.75

DECODE_CAP = 448
MAX_WINDOW_S = 30.0
PROMPT_LIMIT = 200
HUSH_VALIDITY_THRESHOLD = 0.9

_EPS = 1e-9
_LETTERS = string.ascii_lowercase


def corrupt_word(text: str, key: int) -> str:
    """Deterministically misspell ``text`` (one letter substituted)."""
    pos = key % len(text)
    orig = text[pos]
    shift = 1 + (key >> 8) % (len(_LETTERS) - 1)
    if orig.lower() in _LETTERS:
        repl = _LETTERS[(_LETTERS.index(orig.lower()) + shift) % len(_LETTERS)]
    else:
        repl = _LETTERS[key % len(_LETTERS)]
    return text[:pos] + repl + text[pos + 1 :]


@dataclass(frozen=True)
class ModelParams:
    d_model: int = 1024
    enc_layers: int = 24
    dec_layers: int = 24


@dataclass(frozen=True)
class _Step:
    """One scheduled decode position."""

    kind: TokenKind
    top_surface: str = ""
    alt_surface: str | None = None
    model_surface: str = ""
    time: float | None = None
    word_index: int = -1
    rel_pos: float = 0.0


@dataclass(frozen=True)
class EncodingHandle:
    window_start: float
    window_end: float
    n_audio_tokens: int
    policy_applied: InputPolicy
    hallucination_armed: bool
    seed: int
    steps: tuple[_Step, ...] = field(repr=False, compare=False, default=())


@dataclass(frozen=True)
class DecodeDistribution:
    """Top-k next-token candidates, logprobs descending."""

    top_k: tuple[tuple[Token, float], ...]

    def __post_init__(self) -> None:
        k = len(self.top_k)
        if not (1 <= k <= 8):
            raise ValueError(f"top_k size must be in [1, 8]: {k}")
        lps = [lp for _, lp in self.top_k]
        if any(a < b for a, b in zip(lps, lps[1:])):
            raise ValueError("top_k must be sorted by descending logprob")
        # Tolerance covers the pinned -0.05/-3.0 pair, whose probabilities
        # sum to 1.001.
        if sum(np.exp(lps)) > 1.0 + 2e-3:
            raise ValueError("top_k probability mass exceeds 1")


class ScriptedModel:
    """Model backend over an ``UtteranceScript``.

    Stateless given (script, seed, noise_level): safe for concurrent calls.
    """

    def __init__(
        self,
        script: UtteranceScript,
        seed: int | None = None,
        noise_level: float = 0.0,
        params: ModelParams = ModelParams(),
        stream_end_s: float | None = None,
    ) -> None:
        self.script = script
        self.seed = script.seed if seed is None else seed
        self.noise_level = noise_level
        self.model_params = params
        # Where the incoming stream stops (chunk or script end); a window
        # ending here has no in-flight audio, so edge instability freezes.
        self.stream_end_s = (
            script.total_duration if stream_end_s is None else min(stream_end_s, script.total_duration)
        )

    # -- word surfaces ------------------------------------------------------

    def model_surface(self, word_index: int) -> str:
        """The surface this model consistently decodes for a stable word."""
        w = self.script.words[word_index]
        if self.noise_level > 0.0:
            draw = unit_from(self.seed, "noise-draw", word_index)
            if draw < self.noise_level:
                return corrupt_word(w.text, mix(self.seed, "noise-form", word_index))
        return w.text

    def model_words(self) -> list[str]:
        return [self.model_surface(i) for i in range(len(self.script.words))]

    # -- encode -------------------------------------------------------------

    def encode(
        self,
        window: tuple[float, float],
        policy: InputPolicy,
        hush: HushWord | None = None,
    ) -> EncodingHandle:
        t0, t1 = window
        if not (0.0 <= t0 < t1 <= self.script.total_duration + _EPS):
            raise ValueError(f"window [{t0}, {t1}] outside script")
        duration = t1 - t0
        if duration > MAX_WINDOW_S + _EPS:
            raise ValueError(f"window duration {duration:.3f}s exceeds {MAX_WINDOW_S}s")

        n_tokens = effective_tokens(policy, duration)
        armed = False
        if policy is InputPolicy.NO_PAD:
            armed = duration < MAX_WINDOW_S - _EPS
        elif policy is InputPolicy.HUSH_APPEND:
            validity = 0.0
            if hush is not None:
                w = unit_direction(self.seed, len(hush.samples))
                validity = hush_validity(hush, w)
            armed = validity < HUSH_VALIDITY_THRESHOLD

        steps = self._build_steps(t0, t1, armed)
        return EncodingHandle(
            window_start=t0,
            window_end=t1,
            n_audio_tokens=n_tokens,
            policy_applied=policy,
            hallucination_armed=armed,
            seed=self.seed,
            steps=steps,
        )

    def _build_steps(self, t0: float, t1: float, armed: bool) -> tuple[_Step, ...]:
        duration = t1 - t0
        at_stream_end = t1 >= self.stream_end_s - _EPS
        steps: list[_Step] = [_Step(kind=TokenKind.BEG, rel_pos=0.0)]
        for idx, w in enumerate(self.script.words):
            if w.start < t0 - _EPS or w.end > t1 + _EPS:
                continue
            model = self.model_surface(idx)
            # Edge wobble models in-flight audio at a moving boundary; once
            # the window end freezes at the stream end, repeated identical
            # windows must decode identically and settle.
            near_right = (t1 - w.end) < EDGE_MARGIN_S - _EPS and not at_stream_end
            near_left = (
                t0 > _EPS
                and (w.start - t0) < EDGE_MARGIN_S - _EPS
                and not at_stream_end
            )
            top = model
            if near_left:
                draw = unit_from(self.seed, "trim-edge-draw", idx, ms_key(t1))
                if draw < TRIM_EDGE_CORRUPT_P:
                    top = corrupt_word(
                        w.text, mix(self.seed, "trim-edge-form", idx, ms_key(t1))
                    )
            elif near_right:
                draw = unit_from(self.seed, "edge-draw", idx, ms_key(t1))
                if draw >= w.stability:
                    top = corrupt_word(
                        w.text, mix(self.seed, "edge-form", idx, ms_key(t1))
                    )
            if top == model:
                alt = (
                    w.text
                    if model != w.text
                    else corrupt_word(w.text, mix(self.seed, "alt-form", idx))
                )
            else:
                alt = model
            mid = ((w.start + w.end) / 2.0 - t0) / duration
            steps.append(
                _Step(
                    kind=TokenKind.TEXT,
                    top_surface=top,
                    alt_surface=alt,
                    model_surface=model,
                    word_index=idx,
                    rel_pos=min(max(mid, 0.0), 1.0),
                )
            )
            rel_end = (w.end - t0) / duration
            steps.append(
                _Step(kind=TokenKind.TIMESTAMP, time=w.end - t0, rel_pos=rel_end)
            )
            if w.sentence_final:
                steps.append(_Step(kind=TokenKind.PUNCTUATION, rel_pos=rel_end))
        if not armed:
            steps.append(_Step(kind=TokenKind.EOT, rel_pos=1.0))
        return tuple(steps)

    # -- decode -------------------------------------------------------------

    def _is_deviated(self, handle: EncodingHandle, prefix: Hypothesis) -> bool:
        for pos, tok in enumerate(prefix.tokens):
            if tok.kind is not TokenKind.TEXT:
                continue
            if pos < len(handle.steps):
                if tok.surface != handle.steps[pos].model_surface:
                    return True
            elif tok.surface != self._gibberish(handle, pos, 0):
                return True
        return False

    def _gibberish(self, handle: EncodingHandle, position: int, rank: int) -> str:
        key = mix(handle.seed, "gibberish", ms_key(handle.window_end), position, rank)
        length = 3 + key % 5
        return "".join(
            _LETTERS[(key >> (5 * (i + 1))) % len(_LETTERS)] for i in range(length)
        )

    def decode_step(self, handle: EncodingHandle, prefix: Hypothesis) -> DecodeDistribution:
        if prefix.terminated:
            raise ValueError("cannot decode past a terminated hypothesis")
        pos = len(prefix.tokens)
        deviated = self._is_deviated(handle, prefix)
        top_lp = DEVIATED_LOGPROB if deviated else TOP_LOGPROB

        if pos >= len(handle.steps):
            if not handle.hallucination_armed:
                raise ValueError(f"decode position {pos} beyond schedule")
            first = Token(self._gibberish(handle, pos, 0), TokenKind.TEXT, top_lp)
            second = Token(
                self._gibberish(handle, pos, 1), TokenKind.TEXT, COMPETITOR_LOGPROB
            )
            return DecodeDistribution(
                ((first, first.logprob), (second, second.logprob))
            )

        step = handle.steps[pos]
        if step.kind is TokenKind.TEXT:
            first = Token(step.top_surface, TokenKind.TEXT, top_lp)
            second = Token(step.alt_surface, TokenKind.TEXT, COMPETITOR_LOGPROB)
            return DecodeDistribution(
                ((first, first.logprob), (second, second.logprob))
            )
        if step.kind is TokenKind.TIMESTAMP:
            tok = timestamp_token(step.time, top_lp)
        elif step.kind is TokenKind.PUNCTUATION:
            tok = Token(".", TokenKind.PUNCTUATION, top_lp)
        else:
            tok = special_token(step.kind, top_lp)
        return DecodeDistribution(((tok, tok.logprob),))

    # -- prefill ------------------------------------------------------------

    def prefill(self, handle: EncodingHandle, prompt_tokens: list[Token]) -> int:
        if len(prompt_tokens) > PROMPT_LIMIT:
            raise ValueError(f"prompt exceeds {PROMPT_LIMIT} tokens")
        # The scripted model's outputs are unaffected by prompt content; the
        # count feeds the cost model only.
        return len(prompt_tokens)

    # -- cross attention ----------------------------------------------------

    def decode_cross_attention(
        self, handle: EncodingHandle, decoded: list[Token]
    ) -> np.ndarray:
        if not decoded:
            raise ValueError("decoded token list must be non-empty")
        n_frames = handle.n_audio_tokens
        duration = handle.window_end - handle.window_start
        word_mids = [s.rel_pos for s in handle.steps if s.kind is TokenKind.TEXT]
        positions = np.empty(len(decoded), dtype=np.float64)
        prev = 0.0
        text_seen = 0
        for i, tok in enumerate(decoded):
            if tok.kind is TokenKind.TIMESTAMP:
                prev = tok.time / duration
            elif tok.kind is TokenKind.TEXT:
                # Text tokens map to in-window script words in order.
                prev = word_mids[text_seen] if text_seen < len(word_mids) else 1.0
                text_seen += 1
            elif tok.kind is TokenKind.EOT:
                prev = 1.0
            positions[i] = min(max(prev, 0.0), 1.0)
        frames = np.arange(n_frames, dtype=np.float64)[:, None] / n_frames
        noise_key = mix(
            handle.seed,
            "attn",
            ms_key(handle.window_start),
            ms_key(handle.window_end),
        )
        eps = 0.01 * unit_grid(noise_key, n_frames, len(decoded))
        return np.abs(frames - positions[None, :]) + eps
