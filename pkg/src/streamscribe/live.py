"""Live pipelined execution: two real executor workers plus a control worker.

The GPU-role worker encodes each round and decodes its leading steps; the
CPU-role worker finishes the decode. Work moves as immutable (round,
token-range) items over queues; no state is shared. Round windows follow the
deterministic simulated schedule, so the live transcript must match the
simulated one exactly (wall timings differ, which is the point).
"""

from __future__ import annotations

import queue
import threading
import time
from dataclasses import dataclass

from .core import InputPolicy, RunConfig, UtteranceScript
from .costmodel import HushWord
from .decoder import DecodeState, advance_decode, decode_result, new_decode
from .latency import StageLatencyModel
from .scripted_model import ScriptedModel
from .streaming import StreamingEngine, run_stream


@dataclass(frozen=True)
class _LeadItem:
    round_index: int
    window: tuple[float, float]
    ref_tokens: tuple
    stream_end_s: float


@dataclass(frozen=True)
class _LeadDone:
    round_index: int
    handle: object
    state: DecodeState


@dataclass(frozen=True)
class _TailDone:
    round_index: int
    state: DecodeState


@dataclass
class LiveResult:
    transcript: list[str]
    simulated_transcript: list[str]
    rounds: int
    gpu_busy_s: float
    cpu_busy_s: float
    wall_s: float

    @property
    def matches_simulation(self) -> bool:
        return self.transcript == self.simulated_transcript


def _worker(
    inbox: "queue.Queue",
    outbox: "queue.Queue",
    model_factory,
    decode_fn,
    busy: list[float],
) -> None:
    models: dict[float, ScriptedModel] = {}
    while True:
        item = inbox.get()
        if item is None:
            return
        t0 = time.perf_counter()
        if isinstance(item, _LeadItem):
            model = models.get(item.stream_end_s)
            if model is None:
                model = model_factory(item.stream_end_s)
                models[item.stream_end_s] = model
            outbox.put(decode_fn(model, item))
        else:
            model, handle, state, round_index = item
            state = advance_decode(model, handle, state)
            outbox.put(_TailDone(round_index, state))
        busy[0] += time.perf_counter() - t0


def live_run(
    script: UtteranceScript,
    config: RunConfig,
    slm: StageLatencyModel | None = None,
    hush: HushWord | None = None,
) -> LiveResult:
    """Execute the decode workload on two real threads and verify the
    transcript against the simulated run."""
    sim = run_stream(script, config, slm=slm, hush=hush)

    # Replay the simulated windows; each non-empty round becomes a lead item
    # (encode + first K decode steps, GPU role) and a tail item (CPU role).
    engine = StreamingEngine(script, config, slm=slm, hush=hush)
    hush_word = engine.hush if config.input_policy is InputPolicy.HUSH_APPEND else None

    def model_factory(stream_end_s: float) -> ScriptedModel:
        return ScriptedModel(
            script,
            seed=config.seed,
            noise_level=config.noise_level,
            stream_end_s=stream_end_s,
        )

    def lead(model: ScriptedModel, item: _LeadItem) -> _LeadDone:
        handle = model.encode(item.window, config.input_policy, hush_word)
        state = new_decode(config.beam_width, item.ref_tokens)
        state = advance_decode(model, handle, state, max_steps=config.handoff_k)
        return _LeadDone(item.round_index, handle, state)

    gpu_in: "queue.Queue" = queue.Queue()
    gpu_out: "queue.Queue" = queue.Queue()
    cpu_in: "queue.Queue" = queue.Queue()
    cpu_out: "queue.Queue" = queue.Queue()
    gpu_busy = [0.0]
    cpu_busy = [0.0]
    gpu_worker = threading.Thread(
        target=_worker, args=(gpu_in, gpu_out, model_factory, lead, gpu_busy), daemon=True
    )
    cpu_worker = threading.Thread(
        target=_worker, args=(cpu_in, cpu_out, model_factory, None, cpu_busy), daemon=True
    )
    gpu_worker.start()
    cpu_worker.start()

    wall_start = time.perf_counter()
    chunk_len = config.chunk_length
    ref_tokens: tuple = ()
    rounds = 0

    # Control worker: dispatch lead(r) while tail(r-1) may still be running
    # on the CPU worker, then serialize agreement through this thread.
    plan = [t for t in sim.traces if t.raw_tokens]
    engine.state.confirmed.clear()
    engine.traces.clear()

    chunk_base = 0
    prev_chunk = -1
    for trace in plan:
        chunk_idx = int(trace.window_start // chunk_len)
        stream_end = min((chunk_idx + 1) * chunk_len, script.total_duration)
        if chunk_idx != prev_chunk:
            ref_tokens = ()
            engine.state.prev_round_words = []
            chunk_base = len(engine.state.confirmed)
            prev_chunk = chunk_idx
        gpu_in.put(
            _LeadItem(
                trace.round_index,
                (trace.window_start, trace.window_end),
                ref_tokens,
                stream_end,
            )
        )
        done: _LeadDone = gpu_out.get()
        model = model_factory(stream_end)
        if done.state.finished:
            final = done.state
        else:
            cpu_in.put((model, done.handle, done.state, done.round_index))
            tail: _TailDone = cpu_out.get()
            final = tail.state
        result = decode_result(final)
        ref_tokens = result.best.tokens
        engine.apply_decode(
            result, (trace.window_start, trace.window_end), chunk_base
        )
        rounds += 1

    gpu_in.put(None)
    cpu_in.put(None)
    gpu_worker.join()
    cpu_worker.join()

    return LiveResult(
        transcript=[c.word for c in engine.state.confirmed],
        simulated_transcript=sim.transcript_words(),
        rounds=rounds,
        gpu_busy_s=gpu_busy[0],
        cpu_busy_s=cpu_busy[0],
        wall_s=time.perf_counter() - wall_start,
    )
