"""Dual-executor pipelined schedule and the offline allocation profiler.

Protocol per round n: the GPU-role executor runs encode(n), prefill(n), and
the first K decode steps while the CPU-role executor works on round n-1's
decode tail. At the exchange point the GPU takes back whatever of round n-1
the CPU has not started, finishes it, runs DTW(n-1), and only then advances
to round n+1; the CPU switches to round n's decode from step K+1. Scheduling
never changes token results, only timing.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import RunConfig, UtteranceScript
from .costmodel import HushWord
from .latency import CPU, GPU, Allocation, StageLatencyModel, StageRecord
from .streaming import RoundCommit, RoundWork, RunResult, SerialExecutor, run_stream

_EPS = 1e-6


class PipelineScheduleError(RuntimeError):
    """Raised when the event simulation produces an inconsistent schedule."""


@dataclass
class _Pending:
    """A round whose decode tail is running on the CPU-role executor."""

    round_index: int
    cpu_start_ms: float
    step_durs_ms: list[float]
    step_beams: list[int]
    n_decoded_tokens: int


class PipelineExecutor:
    """Event-driven two-executor scheduler implementing the exchange."""

    def __init__(self, slm: StageLatencyModel, handoff_k: int) -> None:
        if handoff_k < 0:
            raise ValueError("handoff_k must be >= 0")
        self.slm = slm
        self.handoff_k = handoff_k
        self._gpu_ready_ms = 0.0
        self._cpu_free_ms = 0.0
        self._pending: _Pending | None = None
        self._last_start_ms = float("-inf")

    def earliest_start_ms(self) -> float:
        return self._gpu_ready_ms

    def commit(self, work: RoundWork) -> RoundCommit:
        slm = self.slm
        start = max(work.start_ms, self._gpu_ready_ms)
        if start < self._last_start_ms - _EPS:
            raise PipelineScheduleError(
                f"round {work.round_index} starts at {start} before round "
                f"committed at {self._last_start_ms}: no forward progress"
            )
        self._last_start_ms = start

        records: list[StageRecord] = []
        emits: list[tuple[int, float]] = []
        t = start
        for name, dur in (
            ("encode", slm.enc_ms(work.n_enc_tokens)),
            ("prefill", slm.prefill_ms(work.n_prompt_tokens)),
        ):
            if dur > 0.0:
                records.append(StageRecord(work.round_index, name, GPU, t, t + dur))
                t += dur

        steps = list(work.call_counts)
        k_gpu = min(self.handoff_k, len(steps))
        gpu_decode_ms = sum(steps[:k_gpu]) * slm.decode_call_ms(GPU)
        if gpu_decode_ms > 0.0:
            records.append(
                StageRecord(work.round_index, "decode_gpu", GPU, t, t + gpu_decode_ms)
            )
            t += gpu_decode_ms
        exchange = t

        if self._pending is not None:
            t = self._takeover(self._pending, exchange, records, emits)
            self._pending = None

        rest = steps[k_gpu:]
        if rest:
            cpu_start = max(exchange, self._cpu_free_ms)
            self._pending = _Pending(
                round_index=work.round_index,
                cpu_start_ms=cpu_start,
                step_durs_ms=[b * slm.decode_call_ms(CPU) for b in rest],
                step_beams=rest,
                n_decoded_tokens=work.n_decoded_tokens,
            )
        else:
            # The GPU finished this round's whole decode: no exchange
            # partner, so its DTW runs immediately (degenerate = serial).
            dtw = slm.dtw_ms(work.n_decoded_tokens)
            if dtw > 0.0:
                records.append(StageRecord(work.round_index, "dtw", GPU, t, t + dtw))
                t += dtw
            emits.append((work.round_index, t))

        self._gpu_ready_ms = t
        return RoundCommit(start, records, emits)

    def _takeover(
        self,
        pending: _Pending,
        exchange: float,
        records: list[StageRecord],
        emits: list[tuple[int, float]],
    ) -> float:
        """GPU takes the pending round's unfinished decode steps plus DTW."""
        slm = self.slm
        done_end = pending.cpu_start_ms
        i = 0
        while (
            i < len(pending.step_durs_ms)
            and done_end + pending.step_durs_ms[i] <= exchange + _EPS
        ):
            done_end += pending.step_durs_ms[i]
            i += 1
        if i < len(pending.step_durs_ms) and done_end < exchange - _EPS:
            # In-flight step completes on the CPU before the swap.
            done_end += pending.step_durs_ms[i]
            i += 1
        if done_end > pending.cpu_start_ms:
            records.append(
                StageRecord(
                    pending.round_index, "decode_cpu", CPU, pending.cpu_start_ms, done_end
                )
            )
        self._cpu_free_ms = done_end

        t = max(exchange, done_end)
        remainder_ms = sum(pending.step_beams[i:]) * slm.decode_call_ms(GPU)
        if remainder_ms > 0.0:
            records.append(
                StageRecord(
                    pending.round_index, "decode_takeover", GPU, t, t + remainder_ms
                )
            )
            t += remainder_ms
        dtw = slm.dtw_ms(pending.n_decoded_tokens)
        if dtw > 0.0:
            records.append(StageRecord(pending.round_index, "dtw", GPU, t, t + dtw))
            t += dtw
        emits.append((pending.round_index, t))
        return t

    def finalize(self) -> RoundCommit:
        records: list[StageRecord] = []
        emits: list[tuple[int, float]] = []
        if self._pending is not None:
            p = self._pending
            end = p.cpu_start_ms + sum(p.step_durs_ms)
            if end > p.cpu_start_ms:
                records.append(
                    StageRecord(p.round_index, "decode_cpu", CPU, p.cpu_start_ms, end)
                )
            t = max(self._gpu_ready_ms, end)
            dtw = self.slm.dtw_ms(p.n_decoded_tokens)
            if dtw > 0.0:
                records.append(StageRecord(p.round_index, "dtw", GPU, t, t + dtw))
                t += dtw
            emits.append((p.round_index, t))
            self._gpu_ready_ms = t
            self._pending = None
        return RoundCommit(self._gpu_ready_ms, records, emits)


# -- schedules ------------------------------------------------------------------


@dataclass
class Schedule:
    """Stage intervals plus the latency outcome of a scheduled run."""

    records: list[StageRecord]
    per_word_latency_ms: list[float]
    makespan_ms: float
    transcript: list[str]
    result: RunResult

    def __post_init__(self) -> None:
        validate_no_overlap(self.records)

    @property
    def mean_latency_ms(self) -> float:
        if not self.per_word_latency_ms:
            return float("inf")
        return sum(self.per_word_latency_ms) / len(self.per_word_latency_ms)


def validate_no_overlap(records: list[StageRecord]) -> None:
    """Busy intervals on one executor must never overlap."""
    by_exec: dict[str, list[StageRecord]] = {}
    for rec in records:
        by_exec.setdefault(rec.executor, []).append(rec)
    for executor, recs in by_exec.items():
        recs = sorted(recs, key=lambda r: (r.start_ms, r.end_ms))
        for a, b in zip(recs, recs[1:]):
            if b.start_ms < a.end_ms - _EPS:
                raise PipelineScheduleError(
                    f"overlapping {executor} intervals: "
                    f"round {a.round_index} [{a.start_ms}, {a.end_ms}] vs "
                    f"round {b.round_index} [{b.start_ms}, {b.end_ms}]"
                )


def _to_schedule(result: RunResult) -> Schedule:
    latencies = [
        c.emit_wall_ms - c.end_time * 1000.0
        for c in result.confirmed
        if c.end_time is not None and c.emit_wall_ms is not None
    ]
    if any(latency < 0 for latency in latencies):
        raise PipelineScheduleError("a word was emitted before it was uttered")
    return Schedule(
        records=result.stage_records,
        per_word_latency_ms=latencies,
        makespan_ms=result.makespan_ms,
        transcript=result.transcript_words(),
        result=result,
    )


def simulate_serial(
    scenario: UtteranceScript,
    slm: StageLatencyModel,
    config: RunConfig,
    hush: HushWord | None = None,
) -> Schedule:
    """Single-executor baseline: every stage in sequence on the GPU role."""
    result = run_stream(scenario, config, slm=slm, hush=hush, executor=SerialExecutor(slm))
    return _to_schedule(result)


def simulate_pipeline(
    scenario: UtteranceScript,
    slm: StageLatencyModel,
    config: RunConfig,
    hush: HushWord | None = None,
) -> Schedule:
    """Dual-executor schedule with workload exchange at ``config.handoff_k``."""
    executor = PipelineExecutor(slm, config.handoff_k)
    result = run_stream(scenario, config, slm=slm, hush=hush, executor=executor)
    return _to_schedule(result)


# -- offline allocation profiling ------------------------------------------------

PROFILE_SWEEP_START = 5


def profile_allocations(
    scenario: UtteranceScript,
    slm: StageLatencyModel,
    total_cores: int,
    config: RunConfig | None = None,
) -> tuple[Allocation, list[tuple[Allocation, float]]]:
    """Sweep CPU-executor core counts and pick the lowest per-word latency.

    The sweep starts at 5 CPU-executor cores; the GPU executor gets the rest
    but one. Ties go to the smaller CPU allocation.
    """
    if total_cores < 7:
        raise ValueError("profiling requires at least 7 cores")
    if config is None:
        config = RunConfig(seed=scenario.seed)
    table: list[tuple[Allocation, float]] = []
    for cpu_cores in range(PROFILE_SWEEP_START, total_cores - 1):
        alloc = Allocation(
            cpu_exec_cores=cpu_cores,
            gpu_exec_cores=total_cores - 1 - cpu_cores,
            total_cores=total_cores,
        )
        sched = simulate_pipeline(scenario, slm.with_allocation(alloc), config)
        table.append((alloc, sched.mean_latency_ms))
    best = min(table, key=lambda row: (row[1], row[0].cpu_exec_cores))[0]
    return best, table
