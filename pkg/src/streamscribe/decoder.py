"""Beam search over the model interface, reference-guided beam pruning, and
DTW token timestamping.

Pruning runs the decode at width 1 while the emitted tokens track the
previous round's raw output (the reference): the first text token is located
in the reference by search, subsequent text tokens must match the reference
cursor, and punctuation/timestamp/special tokens are skipped. Any alignment
failure or mismatch falls back irreversibly to the full beam width for the
rest of the round.

The decode loop is resumable (``new_decode`` / ``advance_decode``): the
pipelined executors hand a partially decoded round across workers at a step
boundary, and both public search functions drive the same stepper.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import kernels
from .core import Hypothesis, Token, TokenKind, hypothesis_sort_key, normalize_word
from .scripted_model import DECODE_CAP, EncodingHandle, ScriptedModel

FRAME_RATE = 50.0


@dataclass
class DecodeResult:
    best: Hypothesis
    beam_sizes_per_step: tuple[int, ...]
    fallback: bool
    steps: int
    model_calls: int
    hit_cap: bool = False
    # Live hypotheses expanded per step (= decode_step invocations); the
    # beam size above is the width the search ran at, which is what beam
    # statistics aggregate.
    calls_per_step: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if len(self.beam_sizes_per_step) != self.steps:
            raise ValueError("one beam size per decode step required")
        if self.calls_per_step and len(self.calls_per_step) != self.steps:
            raise ValueError("one call count per decode step required")


class PruneMode(Enum):
    ALIGNING = "aligning"
    TRACKING = "tracking"
    FALLBACK = "fallback"


class MatchOutcome(Enum):
    KEEP_NARROW = "keep_narrow"
    SKIP = "skip"
    TRIGGER_FALLBACK = "trigger_fallback"


@dataclass
class BeamPruneController:
    """Per-round pruning state: reference tokens, cursor, and mode."""

    ref_tokens: tuple[Token, ...]
    ref_idx: int = 0
    mode: PruneMode = PruneMode.ALIGNING
    full_width: int = 5

    def __post_init__(self) -> None:
        if not (0 <= self.ref_idx <= len(self.ref_tokens)):
            raise ValueError("ref_idx out of range")


def _next_text_index(ref_tokens: tuple[Token, ...], start: int) -> int:
    """First reference index >= start holding a text token (len if none)."""
    for j in range(start, len(ref_tokens)):
        if ref_tokens[j].kind is TokenKind.TEXT:
            return j
    return len(ref_tokens)


def align_reference(first_best: Token, ref_tokens: tuple[Token, ...]) -> int | None:
    """Locate the round's first best text token in the reference.

    Returns the index of the first text reference token whose normalized
    surface matches, or None (alignment failure).
    """
    want = normalize_word(first_best.surface)
    for j, ref in enumerate(ref_tokens):
        if ref.kind is TokenKind.TEXT and normalize_word(ref.surface) == want:
            return j
    return None


def match_step(ctrl: BeamPruneController, best: Token) -> MatchOutcome:
    """Selective matching of the current best token against the reference.

    Non-text tokens are skipped (cursor unchanged); the cursor itself skips
    non-text reference tokens so drifting timestamps and punctuation never
    participate in matching.
    """
    if ctrl.mode is not PruneMode.TRACKING:
        raise ValueError(f"match_step requires Tracking mode, got {ctrl.mode}")
    if best.kind is not TokenKind.TEXT:
        return MatchOutcome.SKIP
    j = _next_text_index(ctrl.ref_tokens, ctrl.ref_idx)
    if j == len(ctrl.ref_tokens):
        ctrl.mode = PruneMode.FALLBACK
        return MatchOutcome.TRIGGER_FALLBACK
    if normalize_word(best.surface) == normalize_word(ctrl.ref_tokens[j].surface):
        ctrl.ref_idx = j + 1
        return MatchOutcome.KEEP_NARROW
    ctrl.mode = PruneMode.FALLBACK
    return MatchOutcome.TRIGGER_FALLBACK


def _best_of(hypotheses: list[Hypothesis] | tuple[Hypothesis, ...]) -> Hypothesis:
    return min(hypotheses, key=hypothesis_sort_key)


# -- resumable decode core ------------------------------------------------------


@dataclass
class DecodeState:
    """A decode in progress; immutable snapshots move between workers."""

    width: int
    length_cap: int = DECODE_CAP
    ctrl: BeamPruneController | None = None
    narrow: Hypothesis | None = None
    live: tuple[Hypothesis, ...] = ()
    beam_sizes: tuple[int, ...] = ()
    calls_per_step: tuple[int, ...] = ()
    steps: int = 0
    model_calls: int = 0
    fallback: bool = False
    finished: bool = False


def new_decode(
    width: int,
    ref_tokens: tuple[Token, ...] = (),
    length_cap: int = DECODE_CAP,
) -> DecodeState:
    if width < 1:
        raise ValueError("width must be >= 1")
    if ref_tokens:
        return DecodeState(
            width=width,
            length_cap=length_cap,
            ctrl=BeamPruneController(ref_tokens=tuple(ref_tokens), full_width=width),
            narrow=Hypothesis(),
        )
    return DecodeState(width=width, length_cap=length_cap, live=(Hypothesis(),))


def _narrow_step(model: ScriptedModel, handle: EncodingHandle, state: DecodeState) -> DecodeState:
    ctrl = state.ctrl
    assert ctrl is not None and state.narrow is not None
    dist = model.decode_step(handle, state.narrow)
    calls = state.model_calls + 1
    sizes = state.beam_sizes + (1,)
    per_step = state.calls_per_step + (1,)
    steps = state.steps + 1
    top = dist.top_k[0][0]

    triggered = False
    if ctrl.mode is PruneMode.ALIGNING and top.kind is TokenKind.TEXT:
        idx = align_reference(top, ctrl.ref_tokens)
        if idx is None:
            ctrl.mode = PruneMode.FALLBACK
            triggered = True
        else:
            ctrl.ref_idx = idx + 1
            ctrl.mode = PruneMode.TRACKING
    elif ctrl.mode is PruneMode.TRACKING:
        triggered = match_step(ctrl, top) is MatchOutcome.TRIGGER_FALLBACK

    if triggered:
        # Re-expand: seed the beam with the committed prefix's top
        # continuations and continue as plain beam search.
        live = tuple(
            sorted(
                (state.narrow.extended(tok) for tok, _ in dist.top_k[: state.width]),
                key=hypothesis_sort_key,
            )
        )
        return replace(
            state,
            ctrl=None,
            narrow=None,
            live=live,
            beam_sizes=sizes,
            calls_per_step=per_step,
            steps=steps,
            model_calls=calls,
            fallback=True,
        )

    hyp = state.narrow.extended(top)
    return replace(
        state,
        narrow=hyp,
        beam_sizes=sizes,
        calls_per_step=per_step,
        steps=steps,
        model_calls=calls,
        finished=hyp.terminated,
        live=(hyp,),
    )


def _beam_step(model: ScriptedModel, handle: EncodingHandle, state: DecodeState) -> DecodeState:
    active = [h for h in state.live if not h.terminated]
    if not active:
        return replace(state, finished=True)
    candidates = [h for h in state.live if h.terminated]
    calls = state.model_calls
    for hyp in active:
        dist = model.decode_step(handle, hyp)
        calls += 1
        for tok, _ in dist.top_k:
            candidates.append(hyp.extended(tok))
    candidates.sort(key=hypothesis_sort_key)
    live = tuple(candidates[: state.width])
    return replace(
        state,
        live=live,
        beam_sizes=state.beam_sizes + (state.width,),
        calls_per_step=state.calls_per_step + (len(active),),
        steps=state.steps + 1,
        model_calls=calls,
        finished=all(h.terminated for h in live),
    )


def advance_decode(
    model: ScriptedModel,
    handle: EncodingHandle,
    state: DecodeState,
    max_steps: int | None = None,
) -> DecodeState:
    """Run up to ``max_steps`` more decode steps (all remaining if None)."""
    budget = state.length_cap - state.steps if max_steps is None else max_steps
    while not state.finished and budget > 0 and state.steps < state.length_cap:
        if state.narrow is not None:
            state = _narrow_step(model, handle, state)
        else:
            state = _beam_step(model, handle, state)
        budget -= 1
    if state.steps >= state.length_cap:
        state = replace(state, finished=True)
    return state


def decode_result(state: DecodeState) -> DecodeResult:
    if not state.finished:
        raise ValueError("decode still in progress")
    pool = [h for h in state.live if h.terminated]
    hit_cap = not pool
    if not pool:
        pool = list(state.live)
    return DecodeResult(
        best=_best_of(pool),
        beam_sizes_per_step=state.beam_sizes,
        fallback=state.fallback,
        steps=state.steps,
        model_calls=state.model_calls,
        hit_cap=hit_cap,
        calls_per_step=state.calls_per_step,
    )


# -- public search entry points ---------------------------------------------------


def beam_search(
    model: ScriptedModel,
    handle: EncodingHandle,
    prompt: tuple[Token, ...] = (),
    width: int = 5,
    length_cap: int = DECODE_CAP,
) -> DecodeResult:
    """Standard beam search: expand every live hypothesis with its top-k,
    keep the best ``width`` by score, no length normalization."""
    state = advance_decode(model, handle, new_decode(width, length_cap=length_cap))
    return decode_result(state)


def pruned_beam_search(
    model: ScriptedModel,
    handle: EncodingHandle,
    prompt: tuple[Token, ...] = (),
    ref_tokens: tuple[Token, ...] = (),
    full_width: int = 5,
    length_cap: int = DECODE_CAP,
) -> DecodeResult:
    """Width-1 decoding driven by reference matching, with irreversible
    fallback to ``full_width`` on alignment failure or token mismatch.

    The first round of a stream (empty reference) bypasses pruning.
    """
    state = advance_decode(
        model, handle, new_decode(full_width, tuple(ref_tokens), length_cap)
    )
    return decode_result(state)


# -- DTW timestamping ------------------------------------------------------------


def dtw_timestamps(attn: np.ndarray, frame_rate: float = FRAME_RATE) -> list[float]:
    """Token timestamps from a cross-attention cost matrix.

    Finds the minimal-cost monotonic path from (0, 0) to (F-1, N-1) with
    moves down/right/diagonal (ties prefer diagonal, then down); token n is
    stamped at the first frame of its path segment divided by ``frame_rate``.
    """
    matrix = np.asarray(attn, dtype=np.float64)
    fs, ns, _ = kernels.dtw_path(matrix)
    n_tokens = matrix.shape[1]
    first_frame = [0] * n_tokens
    seen = set()
    for f, n in zip(fs, ns):
        if n not in seen:
            seen.add(n)
            first_frame[n] = f
    return [f / frame_rate for f in first_frame]
