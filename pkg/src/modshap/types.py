"""Shared domain types and indexing conventions.

Feature indexing is fixed audio-first: a partition with ``n_audio`` windows
and ``n_text`` maskable tokens exposes feature indices ``[0, n_audio)`` for
audio and ``[n_audio, n_audio + n_text)`` for text. Every type here is
immutable after construction and safe to share across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

# A coalition is the set of feature indices treated as present (unmasked)
# during one model evaluation.
Coalition = frozenset[int]


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform. Amplitudes are expected in [-1, 1] and must be finite."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"audio must be mono 1-D samples, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must all be finite")
        if self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", _freeze(samples))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class Token:
    """One prompt token. ``maskable`` marks eligibility before policy filtering."""

    token_id: int
    text: str
    maskable: bool = True


@dataclass(frozen=True)
class TokenizedPrompt:
    """Tokenized prompt with half-open question and instruction spans.

    Instruction tokens are never masked; the maskable set is always a subset
    of the question span (policy filtering happens in :mod:`modshap.masking`).
    """

    tokens: tuple[Token, ...]
    question_span: tuple[int, int]
    instruction_span: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        n = len(self.tokens)
        for name, (start, end) in (
            ("question_span", self.question_span),
            ("instruction_span", self.instruction_span),
        ):
            if not (0 <= start <= end <= n):
                raise ValueError(f"{name} {start, end} out of range for {n} tokens")
        q0, q1 = self.question_span
        i0, i1 = self.instruction_span
        if max(q0, i0) < min(q1, i1):
            raise ValueError("question_span and instruction_span must be disjoint")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def token_ids(self) -> list[int]:
        return [t.token_id for t in self.tokens]


@dataclass(frozen=True)
class FeaturePartition:
    """Ordered feature space: audio windows first, then maskable text tokens.

    ``audio_windows`` are half-open sample ranges that tile the clip exactly;
    ``text_feature_map[k]`` is the prompt position of text feature
    ``n_audio + k``.
    """

    audio_windows: tuple[tuple[int, int], ...]
    text_feature_map: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "audio_windows", tuple((int(s), int(e)) for s, e in self.audio_windows)
        )
        object.__setattr__(self, "text_feature_map", tuple(int(p) for p in self.text_feature_map))
        if not self.audio_windows:
            raise ValueError("a partition needs at least one audio window")
        if not self.text_feature_map:
            raise ValueError("a partition needs at least one text feature")
        cursor = 0
        for start, end in self.audio_windows:
            if start != cursor or end <= start:
                raise ValueError(f"audio windows must tile the clip contiguously, got {self.audio_windows}")
            cursor = end
        if len(set(self.text_feature_map)) != len(self.text_feature_map):
            raise ValueError("text_feature_map positions must be unique")

    @property
    def n_audio(self) -> int:
        return len(self.audio_windows)

    @property
    def n_text(self) -> int:
        return len(self.text_feature_map)

    @property
    def n_features(self) -> int:
        return self.n_audio + self.n_text

    @property
    def clip_len_samples(self) -> int:
        return self.audio_windows[-1][1]

    def is_audio_feature(self, feature: int) -> bool:
        self._check_feature(feature)
        return feature < self.n_audio

    def window_of(self, feature: int) -> tuple[int, int]:
        self._check_feature(feature)
        if feature >= self.n_audio:
            raise ValueError(f"feature {feature} is a text feature")
        return self.audio_windows[feature]

    def token_position_of(self, feature: int) -> int:
        self._check_feature(feature)
        if feature < self.n_audio:
            raise ValueError(f"feature {feature} is an audio feature")
        return self.text_feature_map[feature - self.n_audio]

    def all_features(self) -> Coalition:
        return frozenset(range(self.n_features))

    def _check_feature(self, feature: int) -> None:
        if not 0 <= feature < self.n_features:
            raise ValueError(f"feature {feature} outside [0, {self.n_features})")


@dataclass(frozen=True)
class AnswerTrace:
    """Greedy baseline answer: token ids, output positions, unmasked logits."""

    answer_token_ids: tuple[int, ...]
    answer_positions: tuple[int, ...]
    baseline_logits: np.ndarray
    answer_text: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "answer_token_ids", tuple(int(t) for t in self.answer_token_ids))
        object.__setattr__(self, "answer_positions", tuple(int(p) for p in self.answer_positions))
        logits = np.array(self.baseline_logits, dtype=np.float64)
        if len(self.answer_token_ids) < 1:
            raise ValueError("an answer trace needs at least one token")
        if not (len(self.answer_token_ids) == len(self.answer_positions) == logits.size):
            raise ValueError("answer token ids, positions and logits must have equal length")
        if not np.all(np.isfinite(logits)):
            raise ValueError("baseline logits must be finite")
        object.__setattr__(self, "baseline_logits", _freeze(logits.reshape(-1)))

    def __len__(self) -> int:
        return len(self.answer_token_ids)


@dataclass(frozen=True)
class EstimatorMeta:
    """How an attribution matrix was computed."""

    method: Literal["exact", "permutation"]
    m: int | None = None
    seed: int | None = None
    antithetic: bool | None = None


@dataclass(frozen=True)
class AttributionMatrix:
    """Per-feature, per-answer-token attribution values, features x tokens.

    ``partition`` is attached when the matrix was computed over real masked
    inputs; engine-level game results may leave it ``None``.
    """

    values: np.ndarray
    partition: FeaturePartition | None
    estimator: EstimatorMeta

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"attribution values must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("attribution values must all be finite")
        if self.partition is not None and values.shape[0] != self.partition.n_features:
            raise ValueError(
                f"row count {values.shape[0]} does not match partition "
                f"feature count {self.partition.n_features}"
            )
        object.__setattr__(self, "values", _freeze(values))

    @property
    def n_features(self) -> int:
        return int(self.values.shape[0])

    @property
    def token_count(self) -> int:
        return int(self.values.shape[1])


@dataclass(frozen=True)
class ModalityScore:
    """Total absolute attribution mass per modality plus the normalized shares.

    ``a_shap``/``t_shap`` are ``None`` when both contributions are zero: the
    share is undefined there, which is distinct from an audio share of zero.
    """

    audio_contribution: float
    text_contribution: float
    a_shap: float | None
    t_shap: float | None

    def __post_init__(self) -> None:
        if self.audio_contribution < 0 or self.text_contribution < 0:
            raise ValueError("modality contributions are sums of absolute values, must be >= 0")
        if (self.a_shap is None) != (self.t_shap is None):
            raise ValueError("a_shap and t_shap must be both defined or both undefined")
        if self.a_shap is not None:
            if not (0.0 <= self.a_shap <= 1.0):
                raise ValueError(f"a_shap must lie in [0, 1], got {self.a_shap}")
            if abs(self.a_shap + self.t_shap - 1.0) > 1e-12:
                raise ValueError("a_shap + t_shap must equal 1")

    @property
    def defined(self) -> bool:
        return self.a_shap is not None
