"""WER, per-word latency, beam statistics, and GFLOP totals.

All pure functions over immutable inputs; the report serializes to JSON with
stable field names.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import RoundTrace
from .streaming import ConfirmedWord, RunResult


def edit_distance(reference: Sequence[str], hypothesis: Sequence[str]) -> int:
    """Word-level Levenshtein distance."""
    ids: dict[str, int] = {}
    ref = [ids.setdefault(w, len(ids)) for w in reference]
    hyp = [ids.setdefault(w, len(ids)) for w in hypothesis]
    return kernels.levenshtein(ref, hyp)


def wer(reference_words: Sequence[str], hypothesis_words: Sequence[str]) -> float:
    """Substitutions + deletions + insertions over the reference length."""
    if not reference_words:
        raise ValueError("reference must be non-empty")
    return edit_distance(reference_words, hypothesis_words) / len(reference_words)


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p50_ms: float
    p90_ms: float
    count: int


def per_word_latency(confirmed: Sequence[ConfirmedWord]) -> LatencyStats:
    """Wall time from a word being fully uttered to its confirmed emission."""
    latencies = []
    for c in confirmed:
        if c.end_time is None or c.emit_wall_ms is None:
            continue
        latency = c.emit_wall_ms - c.end_time * 1000.0
        if latency < 0:
            raise ValueError(
                f"word {c.word!r} emitted {-latency:.3f} ms before it was uttered"
            )
        latencies.append(latency)
    if not latencies:
        return LatencyStats(math.nan, math.nan, math.nan, 0)
    arr = np.asarray(latencies)
    return LatencyStats(
        mean_ms=float(arr.mean()),
        p50_ms=float(np.percentile(arr, 50)),
        p90_ms=float(np.percentile(arr, 90)),
        count=len(latencies),
    )


def beam_stats(
    traces: Sequence[RoundTrace], full_width: int = 5
) -> tuple[float, float]:
    """(fraction of decode steps below full width, average beam size)."""
    if not traces:
        raise ValueError("traces must be non-empty")
    sizes = [s for t in traces for s in t.beam_sizes_per_step]
    if not sizes:
        return 0.0, 0.0
    reduced = sum(1 for s in sizes if s < full_width) / len(sizes)
    return reduced, sum(sizes) / len(sizes)


@dataclass(frozen=True)
class MetricsReport:
    wer: float
    avg_word_latency_ms: float
    p50_word_latency_ms: float
    p90_word_latency_ms: float
    beam_reduced_round_fraction: float
    avg_beam_size: float
    total_encode_gflop: float
    total_decode_steps: int
    fallback_rate: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def build_report(result: RunResult, reference_words: Sequence[str]) -> MetricsReport:
    stats = per_word_latency(result.confirmed)
    reduced, avg_beam = beam_stats(result.traces, result.config.beam_width)
    decoded_rounds = [t for t in result.traces if t.beam_sizes_per_step]
    fallback_rate = (
        sum(1 for t in decoded_rounds if t.fallback_triggered) / len(decoded_rounds)
        if decoded_rounds
        else 0.0
    )
    return MetricsReport(
        wer=wer(reference_words, result.transcript_words()),
        avg_word_latency_ms=stats.mean_ms,
        p50_word_latency_ms=stats.p50_ms,
        p90_word_latency_ms=stats.p90_ms,
        beam_reduced_round_fraction=reduced,
        avg_beam_size=avg_beam,
        total_encode_gflop=result.total_encode_gflop,
        total_decode_steps=result.total_decode_steps,
        fallback_rate=fallback_rate,
    )
