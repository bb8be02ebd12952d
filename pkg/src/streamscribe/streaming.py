"""The online serving loop: buffer ingestion and snapshotting, step
scheduling with best-effort degradation, two-round agreement confirmation,
and buffer trimming.

Wall time is simulated: audio becomes available at real-time rate and stage
durations come from a ``StageLatencyModel`` via a pluggable round executor,
so runs are deterministic and the pipelined executor can be swapped in
without touching the semantics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

from .core import (
    InputPolicy,
    RoundTrace,
    RunConfig,
    StageInterval,
    Token,
    UtteranceScript,
    text_token,
    token_stream_to_words,
)
from .costmodel import CostModel, HushWord, encoder_flops
from .decoder import beam_search, pruned_beam_search
from .latency import GPU, StageLatencyModel, StageRecord
from .scripted_model import MAX_WINDOW_S, ModelParams, ScriptedModel

# Windows shorter than this carry no decodable content; the round is a no-op.
MIN_WINDOW_S = 0.1
# Extra rounds allowed after audio ends before the run is cut off.
SETTLE_ROUND_CAP = 8
PROMPT_WORD_LIMIT = 100

_EPS = 1e-9


@dataclass(frozen=True)
class AudioBuffer:
    """The sliding audio window: absolute start time plus duration."""

    start_time: float
    duration: float

    def __post_init__(self) -> None:
        if self.start_time < 0 or self.duration < 0:
            raise ValueError("buffer times must be non-negative")

    @property
    def end_time(self) -> float:
        return self.start_time + self.duration


def ingest(buffer: AudioBuffer, new_audio_duration: float) -> AudioBuffer:
    """Extend the buffer with newly arrived audio."""
    if new_audio_duration < 0:
        raise ValueError("cannot ingest negative audio")
    return AudioBuffer(buffer.start_time, buffer.duration + new_audio_duration)


@dataclass
class ConfirmedWord:
    word: str
    end_time: float | None
    emit_wall_ms: float | None = None


def trim(
    buffer: AudioBuffer,
    confirmed: Sequence[ConfirmedWord],
    threshold: float,
) -> AudioBuffer:
    """Drop already-confirmed audio from the front once the buffer exceeds
    ``threshold``; unconfirmed audio is never discarded."""
    if buffer.duration <= threshold:
        return buffer
    ends = [
        c.end_time
        for c in confirmed
        if c.end_time is not None and c.end_time > buffer.start_time
    ]
    if not ends:
        return buffer
    new_start = min(max(ends), buffer.end_time)
    return AudioBuffer(new_start, buffer.end_time - new_start)


class SchedulerMode(Enum):
    TIMED = "timed"
    BEST_EFFORT = "best_effort"


@dataclass
class StepScheduler:
    """Round cadence: fixed steps while they fit, back-to-back otherwise."""

    step_length_ms: float
    last_round_start_ms: float | None = None
    last_round_cost_ms: float = 0.0

    @property
    def mode(self) -> SchedulerMode:
        if self.step_length_ms <= self.last_round_cost_ms:
            return SchedulerMode.BEST_EFFORT
        return SchedulerMode.TIMED


def next_round_start(
    sched: StepScheduler, now_wall_ms: float, last_round_cost_ms: float
) -> float:
    """Earliest start of the next round under the step rule."""
    if sched.last_round_start_ms is None:
        return now_wall_ms
    return max(
        sched.last_round_start_ms + sched.step_length_ms,
        sched.last_round_start_ms + last_round_cost_ms,
    )


WordEnd = tuple[str, float | None]


def local_agreement_2(
    prev_words: Sequence[WordEnd], cur_words: Sequence[WordEnd]
) -> tuple[list[WordEnd], list[WordEnd]]:
    """Confirm the longest common prefix of two consecutive rounds.

    Both inputs cover only the unconfirmed region and are normalized word
    lists; comparison ignores the attached end times, and confirmed entries
    (with their end times) come from the current round.
    """
    n = 0
    for (prev_w, _), (cur_w, _) in zip(prev_words, cur_words):
        if prev_w != cur_w:
            break
        n += 1
    return list(cur_words[:n]), list(cur_words[n:])


@dataclass
class TranscriptState:
    confirmed: list[ConfirmedWord] = field(default_factory=list)
    prev_round_words: list[WordEnd] = field(default_factory=list)


# -- round executors ----------------------------------------------------------


@dataclass(frozen=True)
class RoundWork:
    """Stage sizing for one round, handed to an executor for scheduling.

    ``call_counts`` holds the decode model calls per sequential step, which
    is what each step actually costs on an executor.
    """

    round_index: int
    start_ms: float
    n_enc_tokens: int
    n_prompt_tokens: int
    call_counts: tuple[int, ...]
    n_decoded_tokens: int


@dataclass
class RoundCommit:
    start_ms: float
    records: list[StageRecord]
    resolved_emits: list[tuple[int, float]]


class RoundExecutor(Protocol):
    def earliest_start_ms(self) -> float: ...

    def commit(self, work: RoundWork) -> RoundCommit: ...

    def finalize(self) -> RoundCommit: ...


class SerialExecutor:
    """Single GPU-role executor: encode, prefill, decode, dtw in sequence."""

    def __init__(self, slm: StageLatencyModel) -> None:
        self.slm = slm
        self._ready_ms = 0.0

    def earliest_start_ms(self) -> float:
        return self._ready_ms

    def commit(self, work: RoundWork) -> RoundCommit:
        slm = self.slm
        t = max(work.start_ms, self._ready_ms)
        start = t
        records: list[StageRecord] = []
        decode_ms = sum(work.call_counts) * slm.decode_call_ms(GPU)
        stages = (
            ("encode", slm.enc_ms(work.n_enc_tokens)),
            ("prefill", slm.prefill_ms(work.n_prompt_tokens)),
            ("decode", decode_ms),
            ("dtw", slm.dtw_ms(work.n_decoded_tokens)),
        )
        for name, dur in stages:
            if dur > 0.0:
                records.append(StageRecord(work.round_index, name, GPU, t, t + dur))
                t += dur
        self._ready_ms = t
        return RoundCommit(start, records, [(work.round_index, t)])

    def finalize(self) -> RoundCommit:
        return RoundCommit(self._ready_ms, [], [])


# -- the engine ---------------------------------------------------------------


@dataclass
class RunResult:
    script: UtteranceScript
    config: RunConfig
    confirmed: list[ConfirmedWord]
    traces: list[RoundTrace]
    stage_records: list[StageRecord]
    makespan_ms: float
    total_encode_gflop: float
    total_decode_steps: int

    def transcript_words(self) -> list[str]:
        return [c.word for c in self.confirmed]


class StreamingEngine:
    """Owns the run state; one control worker mutates it round by round."""

    def __init__(
        self,
        script: UtteranceScript,
        config: RunConfig,
        slm: StageLatencyModel | None = None,
        hush: HushWord | None = None,
        executor: RoundExecutor | None = None,
        params: ModelParams = ModelParams(),
    ) -> None:
        self.script = script
        self.config = config
        self.slm = slm if slm is not None else StageLatencyModel()
        self.executor: RoundExecutor = (
            executor if executor is not None else SerialExecutor(self.slm)
        )
        self.params = params
        self.cost_model = CostModel(
            d_model=params.d_model,
            enc_layers=params.enc_layers,
            dec_layers=params.dec_layers,
        )
        self.hush = hush
        if config.input_policy is InputPolicy.HUSH_APPEND and hush is None:
            self.hush = default_hush(config.seed)

        self.state = TranscriptState()
        self.traces: list[RoundTrace] = []
        self.total_encode_gflop = 0.0
        self.total_decode_steps = 0
        self._ref_tokens: tuple[Token, ...] = ()
        self._round_index = 0
        self._emits: dict[int, float] = {}
        self._confirm_rounds: dict[int, list[ConfirmedWord]] = {}
        self._records: list[StageRecord] = []

    # -- one round ------------------------------------------------------------

    def _prompt_tokens(self) -> tuple[Token, ...]:
        tail = self.state.confirmed[-PROMPT_WORD_LIMIT:]
        return tuple(text_token(c.word, 0.0) for c in tail)

    def run_round(
        self,
        model: ScriptedModel,
        window: tuple[float, float],
        start_ms: float,
        chunk_confirm_base: int,
    ) -> RoundTrace:
        """Snapshot -> encode -> prefill -> decode -> agreement -> trim."""
        t0, t1 = window
        trace = RoundTrace(self._round_index, t0, t1)
        if t1 - t0 < MIN_WINDOW_S:
            self.traces.append(trace)
            self._round_index += 1
            return trace

        hush = self.hush if self.config.input_policy is InputPolicy.HUSH_APPEND else None
        handle = model.encode((t0, t1), self.config.input_policy, hush)
        prompt = self._prompt_tokens()
        n_prompt = model.prefill(handle, list(prompt))

        if self.config.prune_enabled and self._ref_tokens:
            result = pruned_beam_search(
                model, handle, prompt, self._ref_tokens, self.config.beam_width
            )
        else:
            result = beam_search(model, handle, prompt, self.config.beam_width)
        self._ref_tokens = result.best.tokens

        delta, confirmed_now = self.apply_decode(result, (t0, t1), chunk_confirm_base)
        if confirmed_now:
            self._confirm_rounds[self._round_index] = confirmed_now

        work = RoundWork(
            round_index=self._round_index,
            start_ms=start_ms,
            n_enc_tokens=handle.n_audio_tokens,
            n_prompt_tokens=n_prompt,
            call_counts=result.calls_per_step,
            n_decoded_tokens=len(result.best.tokens),
        )
        commit = self.executor.commit(work)
        self._absorb_commit(commit)

        self.total_encode_gflop += encoder_flops(self.cost_model, handle.n_audio_tokens)
        self.total_decode_steps += result.steps

        trace.raw_tokens = result.best.tokens
        trace.confirmed_delta = tuple(w for w, _ in delta)
        trace.beam_sizes_per_step = result.beam_sizes_per_step
        trace.fallback_triggered = result.fallback
        trace.model_calls = result.model_calls
        self.traces.append(trace)
        self._round_index += 1
        return trace

    def apply_decode(
        self,
        result,
        window: tuple[float, float],
        chunk_confirm_base: int,
    ) -> tuple[list[WordEnd], list[ConfirmedWord]]:
        """Convert a decode into transcript state: absolute times, overlap
        stripping, and two-round agreement."""
        t0, _ = window
        words_rel = token_stream_to_words(result.best.tokens)
        words_abs: list[WordEnd] = [
            (w, None if e is None else e + t0) for w, e in words_rel
        ]
        in_window = self.state.confirmed[chunk_confirm_base:]
        overlap = sum(
            1 for c in in_window if c.end_time is None or c.end_time > t0 + _EPS
        )
        cur_tail = words_abs[overlap:]
        delta, new_prev = local_agreement_2(self.state.prev_round_words, cur_tail)
        confirmed_now = [ConfirmedWord(w, e) for w, e in delta]
        self.state.confirmed.extend(confirmed_now)
        self.state.prev_round_words = new_prev
        return delta, confirmed_now

    def _absorb_commit(self, commit: RoundCommit) -> None:
        self._records.extend(commit.records)
        for round_index, emit_ms in commit.resolved_emits:
            self._emits[round_index] = emit_ms
            for conf in self._confirm_rounds.pop(round_index, []):
                conf.emit_wall_ms = emit_ms

    # -- the full run ----------------------------------------------------------

    def run(self) -> RunResult:
        total = self.script.total_duration
        chunk_len = self.config.chunk_length
        chunks: list[tuple[float, float]] = []
        c0 = 0.0
        while c0 < total or not chunks:
            chunks.append((c0, min(c0 + chunk_len, total)))
            c0 += chunk_len

        step_ms = self.config.step_length * 1000.0
        last_start: float | None = None

        for c0, c1 in chunks:
            model = ScriptedModel(
                self.script,
                seed=self.config.seed,
                noise_level=self.config.noise_level,
                params=self.params,
                stream_end_s=c1,
            )
            buffer = AudioBuffer(c0, 0.0)
            self.state.prev_round_words = []
            self._ref_tokens = ()
            chunk_confirm_base = len(self.state.confirmed)
            settle = 0

            while True:
                ready = self.executor.earliest_start_ms()
                if last_start is None:
                    planned = max(ready, c0 * 1000.0)
                else:
                    planned = max(last_start + step_ms, ready, c0 * 1000.0)
                avail = min(planned / 1000.0, c1)
                grown = max(0.0, avail - buffer.end_time)
                buffer = ingest(buffer, grown)
                window_start = max(buffer.start_time, avail - MAX_WINDOW_S)

                trace = self.run_round(
                    model, (window_start, avail), planned, chunk_confirm_base
                )
                last_start = planned
                buffer = trim(buffer, self.state.confirmed, self.config.buffer_threshold)

                if avail >= c1 - _EPS:
                    done = (
                        not trace.confirmed_delta
                        and not self.state.prev_round_words
                        and trace.raw_tokens
                    ) or (c1 - c0) < MIN_WINDOW_S
                    settle += 1
                    if done or settle > SETTLE_ROUND_CAP:
                        break

        final = self.executor.finalize()
        self._absorb_commit(final)
        makespan = max((r.end_ms for r in self._records), default=0.0)

        by_round: dict[int, dict[str, StageInterval]] = {}
        for rec in self._records:
            by_round.setdefault(rec.round_index, {})[rec.stage] = StageInterval(
                rec.start_ms, rec.end_ms, rec.executor
            )
        for trace in self.traces:
            trace.stage_timings = by_round.get(trace.round_index, {})

        return RunResult(
            script=self.script,
            config=self.config,
            confirmed=self.state.confirmed,
            traces=self.traces,
            stage_records=self._records,
            makespan_ms=makespan,
            total_encode_gflop=self.total_encode_gflop,
            total_decode_steps=self.total_decode_steps,
        )


_HUSH_CACHE: dict[int, HushWord] = {}
DEFAULT_HUSH_ITERATIONS = 1500


def default_hush(seed: int) -> HushWord:
    """Train (once per seed) the standard 0.5 s hush word for a model seed."""
    if seed not in _HUSH_CACHE:
        from .costmodel import train_hush

        _HUSH_CACHE[seed] = train_hush(seed, iterations=DEFAULT_HUSH_ITERATIONS)
    return _HUSH_CACHE[seed]


def run_stream(
    script: UtteranceScript,
    config: RunConfig,
    slm: StageLatencyModel | None = None,
    hush: HushWord | None = None,
    executor: RoundExecutor | None = None,
) -> RunResult:
    """Run the full serving loop with a serial executor unless one is given."""
    engine = StreamingEngine(script, config, slm=slm, hush=hush, executor=executor)
    return engine.run()
