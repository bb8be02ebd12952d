"""Shared domain types: tokens, hypotheses, scripts, run configuration.

Everything here is an immutable value after construction and safe to share
across workers. Behavior is limited to constructors, validation, and
(de)serialization.
"""

from __future__ import annotations

import json
import math
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable

SAMPLE_RATE = 16_000

# Seconds; a value of time, always finite and non-negative.
TimePoint = float


class TokenKind(Enum):
    TEXT = "text"
    TIMESTAMP = "timestamp"
    PUNCTUATION = "punctuation"
    SOT = "sot"
    EOT = "eot"
    LANG = "lang"
    TASK = "task"
    BEG = "beg"

    @property
    def is_special(self) -> bool:
        return self in _SPECIALS


_SPECIALS = frozenset(
    {TokenKind.SOT, TokenKind.EOT, TokenKind.LANG, TokenKind.TASK, TokenKind.BEG}
)

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


def normalize_word(surface: str) -> str:
    """Lowercase and strip punctuation characters from a token surface."""
    return surface.lower().translate(_PUNCT_TABLE)


@dataclass(frozen=True)
class Token:
    surface: str
    kind: TokenKind
    logprob: float
    time: TimePoint | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.logprob) or self.logprob > 0.0:
            raise ValueError(f"token logprob must be finite and <= 0: {self.logprob}")
        if self.kind is TokenKind.TIMESTAMP:
            if self.time is None:
                raise ValueError("timestamp token requires a time")
        elif self.time is not None:
            raise ValueError(f"{self.kind.value} token must not carry a time")


def text_token(surface: str, logprob: float = -0.05) -> Token:
    return Token(surface, TokenKind.TEXT, logprob)


def timestamp_token(time: TimePoint, logprob: float = -0.05) -> Token:
    return Token(f"<|{time:.2f}|>", TokenKind.TIMESTAMP, logprob, time=time)


def special_token(kind: TokenKind, logprob: float = -0.05) -> Token:
    if not kind.is_special:
        raise ValueError(f"not a special kind: {kind}")
    return Token(f"<|{kind.value}|>", kind, logprob)


@dataclass(frozen=True)
class Hypothesis:
    """A tentative output sequence with its cumulative log-probability."""

    tokens: tuple[Token, ...] = ()
    score: float = 0.0
    terminated: bool = False

    def __post_init__(self) -> None:
        total = sum(t.logprob for t in self.tokens)
        if abs(total - self.score) > 1e-9:
            raise ValueError(f"score {self.score} != token sum {total}")

    def extended(self, token: Token) -> "Hypothesis":
        if self.terminated:
            raise ValueError("cannot extend a terminated hypothesis")
        return Hypothesis(
            tokens=self.tokens + (token,),
            score=self.score + token.logprob,
            terminated=token.kind is TokenKind.EOT,
        )

    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


def hypothesis_sort_key(hyp: Hypothesis) -> tuple[float, tuple[str, ...]]:
    """Descending score; ties broken by lexicographic token surfaces."""
    return (-hyp.score, hyp.surfaces())


@dataclass(frozen=True)
class Beam:
    width: int
    hypotheses: tuple[Hypothesis, ...] = ()

    def __post_init__(self) -> None:
        if self.width < 1:
            raise ValueError("beam width must be >= 1")
        if len(self.hypotheses) > self.width:
            raise ValueError("more hypotheses than beam width")
        ordered = tuple(sorted(self.hypotheses, key=hypothesis_sort_key))
        if ordered != self.hypotheses:
            object.__setattr__(self, "hypotheses", ordered)


@dataclass(frozen=True)
class ScriptWord:
    text: str
    start: TimePoint
    end: TimePoint
    stability: float = 1.0
    sentence_final: bool = False

    def __post_init__(self) -> None:
        # Timeline rules (start < end, overlap) are reported by
        # validate_script rather than enforced here.
        if not self.text or any(c.isspace() for c in self.text):
            raise ValueError(f"word text must be non-empty, no whitespace: {self.text!r}")
        if not (math.isfinite(self.start) and math.isfinite(self.end)):
            raise ValueError("word times must be finite")
        if min(self.start, self.end) < 0.0:
            raise ValueError("word times must be >= 0")
        if not (0.0 <= self.stability <= 1.0):
            raise ValueError(f"stability must be in [0, 1]: {self.stability}")


# Gap between words that reads as a sentence break, and the minimum audio
# span between breaks (bounds punctuation tokens to a handful per window).
SENTENCE_GAP_S = 0.3
MIN_SENTENCE_SPAN_S = 6.0


def _with_sentence_finals(words: tuple[ScriptWord, ...]) -> tuple[ScriptWord, ...]:
    out: list[ScriptWord] = []
    last_break_end = 0.0
    for i, w in enumerate(words):
        final = i == len(words) - 1
        if not final:
            gap = words[i + 1].start - w.end
            if gap >= SENTENCE_GAP_S and w.end - last_break_end >= MIN_SENTENCE_SPAN_S:
                final = True
        if final:
            last_break_end = w.end
        out.append(replace(w, sentence_final=final))
    return tuple(out)


@dataclass(frozen=True)
class UtteranceScript:
    """Ground-truth word timeline the scripted backend transcribes."""

    words: tuple[ScriptWord, ...]
    total_duration: TimePoint
    seed: int
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        if self.sample_rate != SAMPLE_RATE:
            raise ValueError(f"sample rate is fixed at {SAMPLE_RATE}")
        object.__setattr__(self, "words", _with_sentence_finals(tuple(self.words)))


def validate_script(script: "UtteranceScript") -> list[str]:
    """Return violations of the word-timeline rules (empty list iff valid)."""
    violations: list[str] = []
    words = script.words
    for i, w in enumerate(words):
        if not (w.start < w.end):
            violations.append(f"word {i}: start < end violated")
        if i > 0 and w.start < words[i - 1].start:
            violations.append(f"word {i}: not sorted by start")
        if i > 0 and w.start < words[i - 1].end:
            violations.append(f"word {i}: overlap at index {i}")
    if words and script.total_duration < words[-1].end:
        violations.append(f"word {len(words) - 1}: total_duration < last word end")
    if script.total_duration < 0:
        violations.append("total_duration must be >= 0")
    return violations


class InputPolicy(Enum):
    PAD_TO_30S = "pad_to_30s"
    HUSH_APPEND = "hush_append"
    NO_PAD = "no_pad"


@dataclass(frozen=True)
class RunConfig:
    step_length: TimePoint = 0.01
    buffer_threshold: TimePoint = 15.0
    beam_width: int = 5
    input_policy: InputPolicy = InputPolicy.PAD_TO_30S
    handoff_k: int = 5
    pipeline_enabled: bool = False
    chunk_length: TimePoint = 300.0
    noise_level: float = 0.0
    seed: int = 0
    prune_enabled: bool = False

    def __post_init__(self) -> None:
        if self.step_length <= 0:
            raise ValueError("step_length must be > 0")
        if not (5.0 <= self.buffer_threshold <= 30.0):
            raise ValueError("buffer_threshold must be in [5, 30] seconds")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.handoff_k < 0:
            raise ValueError("handoff_k must be >= 0")
        if not (0.0 <= self.noise_level <= 1.0):
            raise ValueError("noise_level must be in [0, 1]")
        if self.chunk_length <= 0:
            raise ValueError("chunk_length must be > 0")


@dataclass(frozen=True)
class StageInterval:
    start_ms: float
    end_ms: float
    executor: str


@dataclass
class RoundTrace:
    round_index: int
    window_start: TimePoint
    window_end: TimePoint
    raw_tokens: tuple[Token, ...] = ()
    confirmed_delta: tuple[str, ...] = ()
    beam_sizes_per_step: tuple[int, ...] = ()
    fallback_triggered: bool = False
    stage_timings: dict[str, StageInterval] = field(default_factory=dict)
    model_calls: int = 0

    def __post_init__(self) -> None:
        if self.window_start > self.window_end:
            raise ValueError("window_start must be <= window_end")


def token_stream_to_words(
    tokens: Iterable[Token],
) -> list[tuple[str, TimePoint | None]]:
    """Project a token stream onto normalized words with trailing end times.

    Text tokens become words (lowercased, punctuation characters dropped);
    a word's end time is taken from the first timestamp token that follows
    it. Punctuation and special tokens are dropped.
    """
    toks = list(tokens)
    out: list[tuple[str, TimePoint | None]] = []
    for i, tok in enumerate(toks):
        if tok.kind is not TokenKind.TEXT:
            continue
        word = normalize_word(tok.surface)
        if not word:
            continue
        end_time: TimePoint | None = None
        for later in toks[i + 1 :]:
            if later.kind is TokenKind.TIMESTAMP:
                end_time = later.time
                break
        out.append((word, end_time))
    return out


# -- scenario / config files -------------------------------------------------

SCENARIO_VERSION = 1


def script_to_dict(script: UtteranceScript) -> dict:
    return {
        "version": SCENARIO_VERSION,
        "sample_rate": script.sample_rate,
        "seed": script.seed,
        "total_duration_s": script.total_duration,
        "words": [
            {"text": w.text, "start_s": w.start, "end_s": w.end, "stability": w.stability}
            for w in script.words
        ],
    }


def script_from_dict(data: dict) -> UtteranceScript:
    if data.get("version") != SCENARIO_VERSION:
        raise ValueError(f"unsupported scenario version: {data.get('version')!r}")
    return UtteranceScript(
        words=tuple(
            ScriptWord(
                text=w["text"],
                start=float(w["start_s"]),
                end=float(w["end_s"]),
                stability=float(w.get("stability", 1.0)),
            )
            for w in data["words"]
        ),
        total_duration=float(data["total_duration_s"]),
        seed=int(data["seed"]),
        sample_rate=int(data.get("sample_rate", SAMPLE_RATE)),
    )


def save_script(script: UtteranceScript, path: str | Path) -> None:
    Path(path).write_text(json.dumps(script_to_dict(script), indent=2) + "\n")


def load_script(path: str | Path) -> UtteranceScript:
    return script_from_dict(json.loads(Path(path).read_text()))


def config_to_dict(config: RunConfig) -> dict:
    return {
        "step_length_s": config.step_length,
        "buffer_threshold_s": config.buffer_threshold,
        "beam_width": config.beam_width,
        "input_policy": config.input_policy.value,
        "handoff_k": config.handoff_k,
        "pipeline_enabled": config.pipeline_enabled,
        "chunk_length_s": config.chunk_length,
        "noise_level": config.noise_level,
        "seed": config.seed,
        "prune_enabled": config.prune_enabled,
    }


def config_from_dict(data: dict) -> RunConfig:
    kwargs = {}
    renames = {
        "step_length_s": "step_length",
        "buffer_threshold_s": "buffer_threshold",
        "chunk_length_s": "chunk_length",
    }
    for key, value in data.items():
        name = renames.get(key, key)
        if name == "input_policy":
            value = InputPolicy(value)
        kwargs[name] = value
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ValueError(f"bad config field: {exc}") from exc


def save_config(config: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(config), indent=2) + "\n")


def load_config(path: str | Path) -> RunConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
