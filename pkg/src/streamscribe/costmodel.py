"""Transformer FLOPs accounting, input policies, and the hush-word trainer.

The per-layer cost is ``a*n^2*d + b*n*d^2`` with a=2 (attention scores and
context) and b=12 (QKV/output projections plus a 4d-hidden FFN). With the
default encoder shape (d=1024, 24 layers) this lands at ~254 GFLOP for 750
audio tokens and ~564 GFLOP for 1500.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._mix import mix, unit_direction
from .core import InputPolicy, Token, TokenKind, special_token, text_token

AUDIO_TOKENS_PER_S = 50
PAD_TARGET_S = 30.0
PAD_TOKENS = int(PAD_TARGET_S * AUDIO_TOKENS_PER_S)  # 1500
HUSH_LENGTH_S = 0.5
HUSH_SAMPLE_RATE = 16_000
STANDARD_HUSH_DIM = int(HUSH_LENGTH_S * HUSH_SAMPLE_RATE)  # 8000
VALIDITY_GAIN = 8.0


@dataclass(frozen=True)
class CostModel:
    d_model: int = 1024
    enc_layers: int = 24
    dec_layers: int = 24
    attn_coeff: float = 2.0
    linear_coeff: float = 12.0

    def __post_init__(self) -> None:
        if min(self.d_model, self.enc_layers, self.dec_layers) <= 0:
            raise ValueError("model shape values must be positive")
        if min(self.attn_coeff, self.linear_coeff) <= 0:
            raise ValueError("cost coefficients must be positive")


def layer_flops(cm: CostModel, n_tokens: int) -> float:
    n = float(n_tokens)
    d = float(cm.d_model)
    return cm.attn_coeff * n * n * d + cm.linear_coeff * n * d * d


def encoder_flops(cm: CostModel, n_audio_tokens: int) -> float:
    """Encoder cost in GFLOP for an input of ``n_audio_tokens``."""
    if n_audio_tokens < 0:
        raise ValueError("token count must be >= 0")
    return cm.enc_layers * layer_flops(cm, n_audio_tokens) / 1e9


def _round_half_up(x: float) -> int:
    # Half-up (not banker's) so appending the hush always adds exactly
    # HUSH_LENGTH_S * AUDIO_TOKENS_PER_S tokens.
    return math.floor(x + 0.5)


def effective_tokens(policy: InputPolicy, audio_duration_s: float) -> int:
    """Audio tokens the encoder sees for a window under ``policy``."""
    if audio_duration_s > PAD_TARGET_S + 1e-9:
        raise ValueError(f"duration must be <= {PAD_TARGET_S}s")
    if policy is InputPolicy.PAD_TO_30S:
        return PAD_TOKENS
    raw = _round_half_up(audio_duration_s * AUDIO_TOKENS_PER_S)
    if policy is InputPolicy.HUSH_APPEND:
        # raw + 0.5 s worth of tokens, computed additively so the hush
        # contributes exactly the same count at every duration.
        return raw + int(HUSH_LENGTH_S * AUDIO_TOKENS_PER_S)
    return raw


def padding_overhead_ratio(cm: CostModel, duration_s: float) -> float:
    """Encoder cost of the padded input relative to the raw input."""
    if not (0.0 < duration_s <= PAD_TARGET_S):
        raise ValueError("duration must be in (0, 30] seconds")
    raw_tokens = max(1, _round_half_up(duration_s * AUDIO_TOKENS_PER_S))
    return encoder_flops(cm, PAD_TOKENS) / encoder_flops(cm, raw_tokens)


# -- hush word ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HushWord:
    """A short trained audio segment appended to input so the model
    terminates cleanly without 30-second padding."""

    samples: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 2:
            raise ValueError("hush samples must be a 1-d vector of length >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("hush samples must be finite")
        if np.max(np.abs(arr)) > 1.0 + 1e-9:
            raise ValueError("hush samples must lie in [-1, 1]")
        object.__setattr__(self, "samples", arr)


def hush_validity(hush: HushWord, hidden_direction: np.ndarray) -> float:
    """How reliably this hush word stops the scripted model, in [0, 1].

    sigmoid(8 * <samples, w> / |samples|_2); 0.5 for samples orthogonal to
    (or indistinguishable from zero against) the hidden direction.
    """
    w = np.asarray(hidden_direction, dtype=np.float64)
    s = hush.samples
    if s.shape != w.shape:
        raise ValueError(f"dimension mismatch: {s.shape} vs {w.shape}")
    norm = float(np.linalg.norm(s))
    if norm == 0.0:
        return 0.5
    cos = float(np.dot(s, w)) / norm
    return float(1.0 / (1.0 + np.exp(-VALIDITY_GAIN * cos)))


def optimal_validity() -> float:
    """Best validity achievable inside the [-1, 1] amplitude box."""
    return float(1.0 / (1.0 + np.exp(-VALIDITY_GAIN)))


def train_hush(
    backend_seed: int,
    dim: int = STANDARD_HUSH_DIM,
    iterations: int = 500,
    step_size: float = 0.5,
    init: np.ndarray | None = None,
) -> HushWord:
    """Gradient-free ascent on hush validity.

    Two-point finite differences along random unit directions; a step is
    accepted only if it strictly improves validity, so the validity sequence
    is non-decreasing. Amplitudes are clipped to [-1, 1].
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    w = unit_direction(backend_seed, dim)
    rng = np.random.default_rng(mix(backend_seed, "hush-train"))
    s = np.zeros(dim) if init is None else np.asarray(init, dtype=np.float64).copy()

    def value(vec: np.ndarray) -> float:
        return hush_validity(HushWord(vec, seed=backend_seed), w)

    val = value(s)
    delta = 0.05
    for _ in range(iterations):
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        v_plus = value(np.clip(s + delta * u, -1.0, 1.0))
        v_minus = value(np.clip(s - delta * u, -1.0, 1.0))
        grad = (v_plus - v_minus) / (2.0 * delta)
        if grad == 0.0:
            continue
        cand = np.clip(s + step_size * np.sign(grad) * u, -1.0, 1.0)
        cand_val = value(cand)
        if cand_val > val:
            s = cand
            val = cand_val
    return HushWord(s, seed=backend_seed)


# -- training target ----------------------------------------------------------


@dataclass(frozen=True)
class TrainingTarget:
    """Decoder-side target sequence used when fitting a hush word."""

    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        kinds = [t.kind for t in self.tokens]
        if kinds[:3] != [TokenKind.SOT, TokenKind.LANG, TokenKind.TASK]:
            raise ValueError("target must begin with SOT, LANG, TASK")
        if kinds[-1] is not TokenKind.EOT:
            raise ValueError("target must end with EOT")


def training_target_for(words: list[str]) -> TrainingTarget:
    tokens = [
        special_token(TokenKind.SOT, 0.0),
        special_token(TokenKind.LANG, 0.0),
        special_token(TokenKind.TASK, 0.0),
    ]
    tokens.extend(text_token(w, 0.0) for w in words)
    tokens.append(special_token(TokenKind.EOT, 0.0))
    return TrainingTarget(tuple(tokens))


# -- hush word file format ------------------------------------------------------

_HUSH_MAGIC = b"HUSH"
_HUSH_VERSION = 1


def save_hush(hush: HushWord, path: str | Path) -> None:
    """Binary layout: magic, u32 version, u32 dim, i64 seed, f32-LE samples."""
    header = struct.pack(
        "<4sIIq", _HUSH_MAGIC, _HUSH_VERSION, hush.samples.size, hush.seed
    )
    body = hush.samples.astype("<f4").tobytes()
    Path(path).write_bytes(header + body)


def load_hush(path: str | Path) -> HushWord:
    raw = Path(path).read_bytes()
    magic, version, dim, seed = struct.unpack_from("<4sIIq", raw, 0)
    if magic != _HUSH_MAGIC or version != _HUSH_VERSION:
        raise ValueError(f"not a hush word file: {path}")
    samples = np.frombuffer(raw, dtype="<f4", offset=struct.calcsize("<4sIIq"))
    if samples.size != dim:
        raise ValueError("hush file truncated")
    return HushWord(np.clip(samples.astype(np.float64), -1.0, 1.0), seed=seed)
