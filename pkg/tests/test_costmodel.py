"""FLOPs accounting, input policies, hush validity and training."""

import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from streamscribe._mix import unit_direction
from streamscribe.core import InputPolicy, TokenKind
from streamscribe.costmodel import (
    CostModel,
    HushWord,
    effective_tokens,
    encoder_flops,
    hush_validity,
    load_hush,
    optimal_validity,
    padding_overhead_ratio,
    save_hush,
    train_hush,
    training_target_for,
)

MEDIUM = CostModel(d_model=1024, enc_layers=24, dec_layers=24)


class TestEncoderFlops:
    def test_padded_input_near_570(self):
        assert encoder_flops(MEDIUM, 1500) == pytest.approx(570, rel=0.15)

    def test_half_input_near_260(self):
        assert encoder_flops(MEDIUM, 750) == pytest.approx(260, rel=0.15)

    def test_zero_tokens(self):
        assert encoder_flops(MEDIUM, 0) == 0.0

    def test_strictly_increasing_and_convex(self):
        values = [encoder_flops(MEDIUM, n) for n in range(0, 2000, 100)]
        diffs = np.diff(values)
        assert np.all(diffs > 0)
        assert np.all(np.diff(diffs) > 0)


class TestEffectiveTokens:
    def test_pad_is_fixed(self):
        assert effective_tokens(InputPolicy.PAD_TO_30S, 8.0) == 1500

    def test_hush_appends_half_second(self):
        assert effective_tokens(InputPolicy.HUSH_APPEND, 10.0) == 525

    def test_no_pad_boundary(self):
        assert effective_tokens(InputPolicy.NO_PAD, 30.0) == 1500

    @given(st.floats(min_value=0.1, max_value=29.4))
    def test_hush_adds_exactly_25_tokens(self, duration):
        hush = effective_tokens(InputPolicy.HUSH_APPEND, duration)
        raw = effective_tokens(InputPolicy.NO_PAD, duration)
        assert hush - raw == 25


class TestPaddingOverhead:
    def test_nine_seconds_brackets_published_ratio(self):
        assert 3.3 <= padding_overhead_ratio(MEDIUM, 9.0) <= 4.4

    def test_full_input_has_no_overhead(self):
        assert padding_overhead_ratio(MEDIUM, 30.0) == pytest.approx(1.0)

    def test_hush_at_ten_seconds_reduces_3x(self):
        hush_tokens = effective_tokens(InputPolicy.HUSH_APPEND, 10.0)
        ratio = encoder_flops(MEDIUM, 1500) / encoder_flops(MEDIUM, hush_tokens)
        assert ratio >= 3.0

    @given(st.floats(min_value=0.05, max_value=30.0))
    def test_ratio_at_least_one(self, duration):
        assert padding_overhead_ratio(MEDIUM, duration) >= 1.0 - 1e-12


class TestHushValidity:
    def test_aligned_samples(self):
        w = unit_direction(3, 64)
        assert hush_validity(HushWord(w), w) == pytest.approx(0.99966, abs=5e-5)

    def test_orthogonal_samples(self):
        w = np.zeros(64)
        w[0] = 1.0
        s = np.zeros(64)
        s[1] = 1.0
        assert hush_validity(HushWord(s), w) == pytest.approx(0.5)

    def test_anti_aligned_samples(self):
        w = unit_direction(3, 64)
        assert hush_validity(HushWord(-w), w) == pytest.approx(3.35e-4, rel=0.02)

    def test_zero_samples_are_neutral(self):
        w = unit_direction(3, 64)
        assert hush_validity(HushWord(np.zeros(64)), w) == 0.5

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            hush_validity(HushWord(np.zeros(64)), unit_direction(3, 32))


class TestTrainHush:
    def test_reaches_99_percent_of_optimum(self):
        start = time.perf_counter()
        hush = train_hush(7, dim=64, iterations=500)
        elapsed = time.perf_counter() - start
        validity = hush_validity(hush, unit_direction(7, 64))
        assert validity >= 0.99 * optimal_validity()
        assert elapsed < 1.0

    def test_single_iteration_improves_over_neutral(self):
        hush = train_hush(7, dim=64, iterations=1)
        assert hush_validity(hush, unit_direction(7, 64)) > 0.5

    def test_optimum_is_a_fixed_point(self):
        w = unit_direction(7, 64)
        hush = train_hush(7, dim=64, iterations=200, init=w)
        assert np.max(np.abs(hush.samples - w)) < 1e-6

    def test_validity_non_decreasing_over_iterations(self):
        w = unit_direction(11, 64)
        values = [
            hush_validity(train_hush(11, dim=64, iterations=i), w)
            for i in (1, 20, 100, 300)
        ]
        assert values == sorted(values)

    def test_deterministic(self):
        a = train_hush(5, dim=32, iterations=50)
        b = train_hush(5, dim=32, iterations=50)
        assert np.array_equal(a.samples, b.samples)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            train_hush(1, dim=1)
        with pytest.raises(ValueError):
            train_hush(1, dim=8, iterations=0)


class TestTrainingTarget:
    def test_structure(self):
        target = training_target_for(["hello", "world"])
        kinds = [t.kind for t in target.tokens]
        assert kinds[:3] == [TokenKind.SOT, TokenKind.LANG, TokenKind.TASK]
        assert kinds[-1] is TokenKind.EOT
        assert [t.surface for t in target.tokens[3:-1]] == ["hello", "world"]

    def test_rejects_malformed(self):
        from streamscribe.core import special_token, text_token
        from streamscribe.costmodel import TrainingTarget

        with pytest.raises(ValueError):
            TrainingTarget(tokens=(text_token("x", 0.0),) * 4)


class TestHushFile:
    def test_round_trip(self, tmp_path):
        hush = train_hush(9, dim=128, iterations=100)
        path = tmp_path / "h.bin"
        save_hush(hush, path)
        loaded = load_hush(path)
        assert loaded.seed == 9
        assert np.allclose(loaded.samples, hush.samples, atol=1e-6)

    def test_header_layout(self, tmp_path):
        hush = HushWord(np.zeros(16), seed=42)
        path = tmp_path / "h.bin"
        save_hush(hush, path)
        raw = path.read_bytes()
        assert raw[:4] == b"HUSH"
        assert len(raw) == 20 + 16 * 4

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"not a hush file at all....")
        with pytest.raises(ValueError):
            load_hush(path)
