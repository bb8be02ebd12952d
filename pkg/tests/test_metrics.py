"""WER, latency statistics, and beam statistics."""

import math

import pytest
from hypothesis import given, strategies as st

from streamscribe.core import RoundTrace
from streamscribe.metrics import (
    beam_stats,
    build_report,
    edit_distance,
    per_word_latency,
    wer,
)
from streamscribe.streaming import ConfirmedWord

words = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=10)


class TestWer:
    def test_identity(self):
        assert wer(["a", "b", "c"], ["a", "b", "c"]) == 0.0

    def test_substitution(self):
        assert wer(["a", "b", "c"], ["a", "x", "c"]) == pytest.approx(1 / 3)

    def test_deletion(self):
        assert wer(["a", "b", "c", "d"], ["a", "c", "d"]) == pytest.approx(0.25)

    def test_insertions_can_exceed_one(self):
        assert wer(["a"], ["x", "y", "z"]) == 3.0

    def test_empty_reference_rejected(self):
        with pytest.raises(ValueError):
            wer([], ["a"])

    @given(words.filter(bool), words)
    def test_non_negative_and_identity(self, ref, hyp):
        assert wer(ref, hyp) >= 0.0
        assert wer(ref, ref) == 0.0

    @given(words, words)
    def test_distance_symmetric(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(words, words, words)
    def test_distance_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)


class TestPerWordLatency:
    def test_basic_arithmetic(self):
        stats = per_word_latency([ConfirmedWord("w", 2.0, 3100.0)])
        assert stats.mean_ms == pytest.approx(1100.0)
        assert stats.p50_ms == stats.p90_ms == stats.mean_ms

    def test_negative_latency_rejected(self):
        with pytest.raises(ValueError):
            per_word_latency([ConfirmedWord("w", 2.0, 1000.0)])

    def test_percentiles(self):
        confirmed = [
            ConfirmedWord(f"w{i}", 0.0, float(100 * (i + 1))) for i in range(10)
        ]
        stats = per_word_latency(confirmed)
        assert stats.mean_ms == pytest.approx(550.0)
        assert stats.p50_ms == pytest.approx(550.0)
        assert stats.p90_ms == pytest.approx(910.0)

    def test_empty_is_nan(self):
        stats = per_word_latency([])
        assert math.isnan(stats.mean_ms)
        assert stats.count == 0

    def test_unstamped_words_skipped(self):
        stats = per_word_latency(
            [ConfirmedWord("a", None, 50.0), ConfirmedWord("b", 1.0, 1500.0)]
        )
        assert stats.count == 1


class TestBeamStats:
    def trace(self, sizes, fallback=False):
        return RoundTrace(
            0, 0.0, 1.0, beam_sizes_per_step=tuple(sizes), fallback_triggered=fallback
        )

    def test_all_narrow(self):
        assert beam_stats([self.trace([1, 1, 1])], 5) == (1.0, 1.0)

    def test_all_full(self):
        assert beam_stats([self.trace([5, 5])], 5) == (0.0, 5.0)

    def test_mixed(self):
        reduced, avg = beam_stats([self.trace([1, 5]), self.trace([1, 1])], 5)
        assert reduced == pytest.approx(0.75)
        assert avg == pytest.approx(2.0)

    def test_empty_traces_rejected(self):
        with pytest.raises(ValueError):
            beam_stats([], 5)

    def test_no_steps(self):
        assert beam_stats([self.trace([])], 5) == (0.0, 0.0)

    def test_pruning_disabled_run_has_zero_reduced_fraction(self):
        from streamscribe.core import RunConfig
        from streamscribe.scenarios import generate_script
        from streamscribe.streaming import run_stream

        script = generate_script(30, 15.0, seed=4, stability=0.8)
        result = run_stream(script, RunConfig(seed=4, prune_enabled=False))
        reduced, avg = beam_stats(result.traces, 5)
        assert reduced == 0.0
        assert avg == 5.0


class TestReport:
    def test_round_trips_to_json(self):
        from streamscribe.core import RunConfig
        from streamscribe.scenarios import generate_script
        from streamscribe.streaming import run_stream
        from streamscribe.core import normalize_word
        import json

        script = generate_script(12, 6.0, seed=2)
        result = run_stream(script, RunConfig(seed=2))
        report = build_report(result, [normalize_word(w.text) for w in script.words])
        data = json.loads(report.to_json())
        assert set(data) == {
            "wer",
            "avg_word_latency_ms",
            "p50_word_latency_ms",
            "p90_word_latency_ms",
            "beam_reduced_round_fraction",
            "avg_beam_size",
            "total_encode_gflop",
            "total_decode_steps",
            "fallback_rate",
        }
        assert data["wer"] == 0.0
        assert data["total_encode_gflop"] > 0
