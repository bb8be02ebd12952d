"""Online loop: ingestion, scheduling, agreement, trimming, full rounds."""

import pytest
from hypothesis import given, strategies as st

from streamscribe.core import InputPolicy, RunConfig, ScriptWord, UtteranceScript, normalize_word
from streamscribe.scenarios import generate_script
from streamscribe.streaming import (
    AudioBuffer,
    ConfirmedWord,
    SchedulerMode,
    StepScheduler,
    ingest,
    local_agreement_2,
    next_round_start,
    run_stream,
    trim,
)


class TestIngest:
    def test_extends_duration(self):
        buf = ingest(AudioBuffer(0.0, 14.5), 0.5)
        assert buf.duration == pytest.approx(15.0)
        assert buf.start_time == 0.0

    def test_zero_is_identity(self):
        buf = AudioBuffer(2.0, 5.0)
        assert ingest(buf, 0.0) == buf

    def test_no_float_drift_on_small_steps(self):
        buf = AudioBuffer(0.0, 0.0)
        for _ in range(100):
            buf = ingest(buf, 0.01)
        assert abs(buf.duration - 1.0) < 1e-9

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ingest(AudioBuffer(0.0, 1.0), -0.1)


class TestNextRoundStart:
    def test_timed_mode(self):
        sched = StepScheduler(step_length_ms=1000.0)
        starts = [0.0]
        sched.last_round_start_ms = 0.0
        for _ in range(2):
            nxt = next_round_start(sched, starts[-1], 400.0)
            starts.append(nxt)
            sched.last_round_start_ms = nxt
        assert starts == [0.0, 1000.0, 2000.0]

    def test_best_effort_mode(self):
        sched = StepScheduler(step_length_ms=10.0)
        sched.last_round_start_ms = 0.0
        first = next_round_start(sched, 0.0, 400.0)
        sched.last_round_start_ms = first
        second = next_round_start(sched, first, 400.0)
        assert (first, second) == (400.0, 800.0)
        sched.last_round_cost_ms = 400.0
        assert sched.mode is SchedulerMode.BEST_EFFORT

    def test_boundary_step_equals_cost(self):
        sched = StepScheduler(step_length_ms=500.0)
        sched.last_round_start_ms = 0.0
        assert next_round_start(sched, 0.0, 500.0) == 500.0

    def test_first_round_starts_now(self):
        sched = StepScheduler(step_length_ms=100.0)
        assert next_round_start(sched, 42.0, 0.0) == 42.0


class TestLocalAgreement:
    def pairs(self, words):
        return [(w, None) for w in words]

    def test_common_prefix_confirms(self):
        delta, new_prev = local_agreement_2(self.pairs("abc"), self.pairs("abd"))
        assert [w for w, _ in delta] == ["a", "b"]
        assert [w for w, _ in new_prev] == ["d"]

    def test_first_sighting_never_confirms(self):
        delta, new_prev = local_agreement_2([], self.pairs("ab"))
        assert delta == []
        assert [w for w, _ in new_prev] == ["a", "b"]

    def test_full_agreement(self):
        delta, new_prev = local_agreement_2(self.pairs("ab"), self.pairs("ab"))
        assert [w for w, _ in delta] == ["a", "b"]
        assert new_prev == []

    def test_end_times_come_from_current_round(self):
        prev = [("a", 1.0)]
        cur = [("a", 2.0)]
        delta, _ = local_agreement_2(prev, cur)
        assert delta == [("a", 2.0)]

    @given(
        st.lists(st.sampled_from("abcde"), max_size=8),
        st.lists(st.sampled_from("abcde"), max_size=8),
    )
    def test_delta_is_longest_common_prefix(self, prev, cur):
        delta, new_prev = local_agreement_2(
            [(w, None) for w in prev], [(w, None) for w in cur]
        )
        n = len(delta)
        assert prev[:n] == cur[:n]
        assert n == len(cur) or n == len(prev) or prev[n] != cur[n]
        assert [w for w, _ in delta] + [w for w, _ in new_prev] == cur


class TestTrim:
    def confirmed(self, *ends):
        return [ConfirmedWord(f"w{i}", e, 0.0) for i, e in enumerate(ends)]

    def test_trims_to_latest_confirmed_end(self):
        buf = trim(AudioBuffer(0.0, 18.0), self.confirmed(3.0, 6.2), 15.0)
        assert buf.start_time == pytest.approx(6.2)
        assert buf.duration == pytest.approx(11.8)

    def test_no_confirmed_timestamps_leaves_buffer(self):
        buf = AudioBuffer(0.0, 18.0)
        assert trim(buf, [ConfirmedWord("x", None, 0.0)], 15.0) == buf

    def test_below_threshold_untouched(self):
        buf = AudioBuffer(0.0, 14.0)
        assert trim(buf, self.confirmed(6.0), 15.0) == buf

    def test_never_trims_unconfirmed_audio(self):
        # Confirmed ends before the buffer start are ignored.
        buf = AudioBuffer(10.0, 20.0)
        out = trim(buf, self.confirmed(3.0, 12.5), 15.0)
        assert out.start_time == pytest.approx(12.5)


def hand_script():
    words = (
        ScriptWord("the", 0.3, 0.8),
        ScriptWord("cat", 1.0, 1.5),
        ScriptWord("sat", 1.8, 2.3),
    )
    return UtteranceScript(words=words, total_duration=3.0, seed=5)


class TestRunRound:
    def test_word_confirms_on_second_sighting(self):
        # 1 s steps on a 3 s script: "the" fully visible from the window
        # ending at 1.1 s; it must confirm in the next round containing it.
        script = hand_script()
        config = RunConfig(step_length=1.0, seed=5)
        result = run_stream(script, config)
        sightings = []
        for trace in result.traces:
            if any(t.kind.value == "text" and t.surface == "the" for t in trace.raw_tokens):
                sightings.append(trace)
        assert len(sightings) >= 2
        first, second = sightings[0], sightings[1]
        assert "the" not in first.confirmed_delta
        assert "the" in second.confirmed_delta

    def test_empty_window_rounds_produce_empty_traces(self):
        script = hand_script()
        config = RunConfig(step_length=0.05, seed=5)
        result = run_stream(script, config)
        early = [t for t in result.traces if t.window_end < 0.1]
        assert early
        assert all(not t.raw_tokens and not t.confirmed_delta for t in early)

    def test_full_transcript_confirmed(self):
        script = hand_script()
        result = run_stream(script, RunConfig(step_length=0.2, seed=5))
        assert result.transcript_words() == ["the", "cat", "sat"]

    def test_chunk_boundary_resets_state_and_carries_transcript(self):
        words = []
        t = 0.3
        for i in range(24):
            if 9.2 < t < 10.05:  # keep words clear of the 10 s chunk boundary
                t = 10.05
            words.append(ScriptWord(f"w{i}", round(t, 2), round(t + 0.4, 2)))
            t += 0.55
        script = UtteranceScript(words=tuple(words), total_duration=t + 0.5, seed=2)
        config = RunConfig(step_length=0.2, chunk_length=10.0, seed=2)
        result = run_stream(script, config)
        assert result.transcript_words() == [normalize_word(w.text) for w in words]
        # Windows never span a chunk boundary.
        for trace in result.traces:
            assert trace.window_end <= 10.0 or trace.window_start >= 10.0


class TestRunInvariants:
    def run_noisy(self):
        script = generate_script(60, 30.0, seed=13, stability=0.8)
        config = RunConfig(seed=13, noise_level=0.1, prune_enabled=True)
        return run_stream(script, config)

    def test_confirmed_words_appear_in_two_consecutive_rounds(self):
        result = self.run_noisy()
        decoded = [t for t in result.traces if t.raw_tokens]
        for i, trace in enumerate(decoded):
            if not trace.confirmed_delta:
                continue
            assert i > 0
            prev_words = [
                w for w, _ in _trace_words(decoded[i - 1])
            ]
            cur_words = [w for w, _ in _trace_words(trace)]
            for word in trace.confirmed_delta:
                assert word in prev_words
                assert word in cur_words

    def test_monotone_emission(self):
        result = self.run_noisy()
        emits = [c.emit_wall_ms for c in result.confirmed]
        assert all(a <= b + 1e-9 for a, b in zip(emits, emits[1:]))
        ends = [c.end_time for c in result.confirmed if c.end_time is not None]
        assert all(a <= b + 1e-9 for a, b in zip(ends, ends[1:]))

    def test_best_effort_gaps_match_round_costs(self):
        # step 0.01 s with round costs >= 10 ms: gaps equal costs within 1 ms.
        script = generate_script(40, 20.0, seed=3)
        result = run_stream(script, RunConfig(seed=3))
        rounds = [t for t in result.traces if t.stage_timings]
        for a, b in zip(rounds, rounds[1:]):
            a_start = min(s.start_ms for s in a.stage_timings.values())
            a_end = max(s.end_ms for s in a.stage_timings.values())
            b_start = min(s.start_ms for s in b.stage_timings.values())
            cost = a_end - a_start
            if cost >= 10.0 and b.round_index == a.round_index + 1:
                assert b_start - a_start == pytest.approx(cost, abs=1.0)

    def test_window_start_only_moves_to_confirmed_ends(self):
        result = self.run_noisy()
        confirmed_ends = {
            c.end_time for c in result.confirmed if c.end_time is not None
        }
        for trace in result.traces:
            assert trace.window_start == 0.0 or trace.window_start in confirmed_ends
        starts = [t.window_start for t in result.traces]
        assert all(a <= b for a, b in zip(starts, starts[1:]))


def _trace_words(trace):
    from streamscribe.core import token_stream_to_words

    return token_stream_to_words(trace.raw_tokens)
