"""Masked-inference endpoint contract and synthetic reference models.

A :class:`ModelEndpoint` exposes everything attribution needs: capability
discovery, tokenization, greedy generation, and teacher-forced scoring of
masked input variants. Synthetic endpoints implement the same contract with
analytically known attributions, which makes them the oracle backbone of the
test suite. They are stateless: feature geometry is reconstructed from the
masked inputs themselves, so concurrent scoring of different questions is
safe.
"""

from __future__ import annotations

import zlib
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .errors import EmptyGenerationError, ProtocolViolationError
from .masking import DEFAULT_PROTECTED_TOKEN_SURFACES, MaskPolicy, plan_audio_windows
from .types import AnswerTrace, AudioClip, FeaturePartition, Token, TokenizedPrompt

# Token id 3 is reserved for the mask substitute; content ids start at 16 so
# the two ranges can never collide.
MASK_TOKEN_ID = 3
_CONTENT_ID_BASE = 16

QUESTION_MARKER = "<|question|>"
ANSWER_MARKER = "<|answer|>"


def token_id_for(text: str) -> int:
    """Stable content-token id used by the synthetic tokenizer."""
    return _CONTENT_ID_BASE + (zlib.crc32(text.encode("utf-8")) & 0xFFFFF)


@dataclass(frozen=True)
class EndpointInfo:
    """Capability set reported by an endpoint; stable for the lifetime of a run."""

    model_id: str
    sample_rate_hz: int
    max_audio_seconds: float | None
    mask_token_id: int
    protected_tokens: tuple[str, ...]
    max_batch: int
    logit_tolerance: float


def mask_policy_from(info: EndpointInfo) -> MaskPolicy:
    """Build the masking policy an endpoint prescribes."""
    return MaskPolicy(
        mask_token_id=info.mask_token_id,
        protected_token_surfaces=frozenset(info.protected_tokens),
    )


class ModelEndpoint(ABC):
    """Abstract masked-inference contract."""

    @abstractmethod
    def describe(self) -> EndpointInfo: ...

    @abstractmethod
    def tokenize(self, text: str) -> TokenizedPrompt: ...

    @abstractmethod
    def generate(self, clip: AudioClip, prompt: TokenizedPrompt) -> AnswerTrace:
        """Greedy generation on the unmasked input; raises EmptyGenerationError
        when the model emits only terminators."""

    @abstractmethod
    def score(
        self,
        samples: np.ndarray,
        token_ids: Sequence[int],
        answer_token_ids: Sequence[int],
        answer_positions: Sequence[int],
    ) -> np.ndarray:
        """Teacher-forced logits of the fixed answer tokens under a masked input."""

    def score_batch(
        self,
        variants: Sequence[tuple[np.ndarray, Sequence[int]]],
        answer_token_ids: Sequence[int],
        answer_positions: Sequence[int],
    ) -> np.ndarray:
        """Score several masked variants; default falls back to one-by-one."""
        if not variants:
            return np.zeros((0, len(answer_token_ids)))
        return np.stack(
            [
                self.score(samples, token_ids, answer_token_ids, answer_positions)
                for samples, token_ids in variants
            ]
        )


def tokenize_text(text: str) -> TokenizedPrompt:
    """Deterministic whitespace tokenizer shared by synthetic endpoints and the stub.

    Question/answer markers delimit the question span (markers included, so
    policy filtering removes them); the first prompt line is the instruction
    span. Plain text without markers is treated as all-question.
    """
    surfaces = text.split()
    tokens = tuple(Token(token_id=token_id_for(s), text=s) for s in surfaces)
    try:
        q_start = surfaces.index(QUESTION_MARKER)
        q_end = surfaces.index(ANSWER_MARKER, q_start) + 1
    except ValueError:
        return TokenizedPrompt(tokens, question_span=(0, len(tokens)), instruction_span=(0, 0))
    first_line_tokens = len(text.split("\n", 1)[0].split())
    instruction_span = (0, min(first_line_tokens, q_start))
    return TokenizedPrompt(tokens, question_span=(q_start, q_end), instruction_span=instruction_span)


SyntheticKind = Literal["additive", "dummy_audio", "dummy_text", "interaction", "constant"]


@dataclass(frozen=True)
class SyntheticModelSpec:
    """Closed-form test model.

    additive scores ``base + sum of weights over present features``;
    dummy_audio/dummy_text zero out one modality's weights; interaction pays
    ``interaction_bonus`` per pair whose members are all present (additive
    part zero unless ``weights`` given); constant always returns ``base``.
    When ``weights`` is None, per-feature weights default to ``audio_weight``
    and ``text_weight`` replicated over whatever geometry a question induces.
    """

    kind: SyntheticKind
    weights: tuple[float, ...] | None = None
    audio_weight: float = 1.0
    text_weight: float = 1.0
    interaction_pairs: tuple[tuple[int, int], ...] = ()
    interaction_bonus: float = 1.0
    base: float = 0.0
    answer_text: str = "(B) Doorbell"

    def __post_init__(self) -> None:
        if self.kind not in ("additive", "dummy_audio", "dummy_text", "interaction", "constant"):
            raise ValueError(f"unknown synthetic kind {self.kind!r}")
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            if not all(np.isfinite(weights)):
                raise ValueError("synthetic weights must be finite")
            object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class _Geometry:
    windows: tuple[tuple[int, int], ...]
    maskable_positions: tuple[int, ...]

    @property
    def n_audio(self) -> int:
        return len(self.windows)

    @property
    def n_text(self) -> int:
        return len(self.maskable_positions)


class SyntheticEndpoint(ModelEndpoint):
    """In-process endpoint with analytically known attributions."""

    def __init__(
        self,
        spec: SyntheticModelSpec,
        partition_hint: FeaturePartition | None = None,
        *,
        sample_rate_hz: int = 16000,
        max_batch: int = 64,
    ) -> None:
        self._spec = spec
        self._partition_hint = partition_hint
        self._info = EndpointInfo(
            model_id=f"synthetic-{spec.kind}",
            sample_rate_hz=sample_rate_hz,
            max_audio_seconds=None,
            mask_token_id=MASK_TOKEN_ID,
            protected_tokens=tuple(sorted(DEFAULT_PROTECTED_TOKEN_SURFACES)),
            max_batch=max_batch,
            logit_tolerance=0.0,
        )
        self._protected_ids = frozenset(token_id_for(s) for s in self._info.protected_tokens)

    def describe(self) -> EndpointInfo:
        return self._info

    def tokenize(self, text: str) -> TokenizedPrompt:
        return tokenize_text(text)

    def generate(self, clip: AudioClip, prompt: TokenizedPrompt) -> AnswerTrace:
        answer_surfaces = self._spec.answer_text.split()
        if not answer_surfaces:
            raise EmptyGenerationError("synthetic model emitted only terminators")
        answer_ids = [token_id_for(s) for s in answer_surfaces]
        positions = [len(prompt) + i for i in range(len(answer_ids))]
        logits = self.score(clip.samples, prompt.token_ids, answer_ids, positions)
        return AnswerTrace(
            answer_token_ids=tuple(answer_ids),
            answer_positions=tuple(positions),
            baseline_logits=logits,
            answer_text=self._spec.answer_text,
        )

    def score(
        self,
        samples: np.ndarray,
        token_ids: Sequence[int],
        answer_token_ids: Sequence[int],
        answer_positions: Sequence[int],
    ) -> np.ndarray:
        if len(answer_token_ids) != len(answer_positions):
            raise ProtocolViolationError(
                f"answer ids ({len(answer_token_ids)}) and positions "
                f"({len(answer_positions)}) must have equal length"
            )
        if len(answer_token_ids) == 0:
            raise ProtocolViolationError("cannot score an empty answer")
        value = self._coalition_value(np.asarray(samples, dtype=np.float64), list(token_ids))
        return np.full(len(answer_token_ids), value)

    # Geometry reconstruction. The question span is located by the marker
    # token ids; masked text tokens keep classifying as maskable because the
    # mask id never collides with content ids. An all-zero audio window is
    # indistinguishable from a masked one for any model, so treating it as
    # absent is exact.
    def _geometry(self, samples: np.ndarray, token_ids: list[int]) -> _Geometry:
        if self._partition_hint is not None:
            hint = self._partition_hint
            if hint.clip_len_samples != samples.size:
                raise ValueError(
                    f"partition hint covers {hint.clip_len_samples} samples, input has {samples.size}"
                )
            return _Geometry(hint.audio_windows, hint.text_feature_map)
        q_id = token_id_for(QUESTION_MARKER)
        a_id = token_id_for(ANSWER_MARKER)
        try:
            lo = token_ids.index(q_id) + 1
            hi = token_ids.index(a_id, lo)
        except ValueError:
            lo, hi = 0, len(token_ids)
        maskable = tuple(
            pos for pos in range(lo, hi) if token_ids[pos] not in self._protected_ids
        )
        if not maskable or samples.size == 0:
            raise ValueError("cannot infer feature geometry from an input without question tokens or audio")
        windows = tuple(plan_audio_windows(samples.size, len(maskable)))
        return _Geometry(windows, maskable)

    def _present_features(
        self, samples: np.ndarray, token_ids: list[int]
    ) -> tuple[np.ndarray, _Geometry]:
        geo = self._geometry(samples, token_ids)
        present = np.zeros(geo.n_audio + geo.n_text, dtype=bool)
        for j, (start, end) in enumerate(geo.windows):
            present[j] = bool(np.any(samples[start:end] != 0.0))
        for k, pos in enumerate(geo.maskable_positions):
            present[geo.n_audio + k] = token_ids[pos] != self._info.mask_token_id
        return present, geo

    def _feature_weights(self, n_audio: int, n_text: int) -> np.ndarray:
        spec = self._spec
        if spec.weights is not None:
            if len(spec.weights) != n_audio + n_text:
                raise ValueError(
                    f"spec carries {len(spec.weights)} weights, geometry has {n_audio + n_text} features"
                )
            return np.asarray(spec.weights)
        audio_w = spec.audio_weight if spec.kind in ("additive", "dummy_text") else 0.0
        text_w = spec.text_weight if spec.kind in ("additive", "dummy_audio") else 0.0
        return np.concatenate([np.full(n_audio, audio_w), np.full(n_text, text_w)])

    def _coalition_value(self, samples: np.ndarray, token_ids: list[int]) -> float:
        spec = self._spec
        if spec.kind == "constant":
            return spec.base
        present, geo = self._present_features(samples, token_ids)
        weights = self._feature_weights(geo.n_audio, geo.n_text)
        value = spec.base + float(weights[present].sum())
        if spec.kind == "interaction":
            for pair in spec.interaction_pairs:
                if all(0 <= j < present.size and present[j] for j in pair):
                    value += spec.interaction_bonus
        return value

    def __repr__(self) -> str:
        return f"SyntheticEndpoint({self._spec.kind!r})"


def synthetic_endpoint(
    spec: SyntheticModelSpec,
    partition_hint: FeaturePartition | None = None,
    **kwargs,
) -> SyntheticEndpoint:
    """Factory mirroring the endpoint constructor."""
    return SyntheticEndpoint(spec, partition_hint, **kwargs)


class SyntheticClassifierEndpoint(SyntheticEndpoint):
    """Synthetic endpoint that also exposes class probabilities.

    Class logits are linear in the present-feature indicator
    (``base[c] + class_weights[c] . present``) followed by a softmax;
    ``fixed_probabilities`` short-circuits everything for constant stubs.
    """

    def __init__(
        self,
        class_weights: Sequence[Sequence[float]] | None = None,
        class_bases: Sequence[float] | None = None,
        n_classes: int | None = None,
        fixed_probabilities: Sequence[float] | None = None,
        partition_hint: FeaturePartition | None = None,
        **kwargs,
    ) -> None:
        super().__init__(SyntheticModelSpec(kind="constant"), partition_hint, **kwargs)
        if fixed_probabilities is not None:
            self._fixed = np.asarray(fixed_probabilities, dtype=np.float64)
            self._class_weights = None
            self._class_bases = None
            return
        if class_weights is None:
            if n_classes is None:
                raise ValueError("need class_weights, fixed_probabilities, or n_classes")
            self._fixed = np.full(n_classes, 1.0 / n_classes)
            self._class_weights = None
            self._class_bases = None
            return
        self._fixed = None
        self._class_weights = np.asarray(class_weights, dtype=np.float64)
        k = self._class_weights.shape[0]
        self._class_bases = (
            np.asarray(class_bases, dtype=np.float64) if class_bases is not None else np.zeros(k)
        )

    def class_probabilities(self, samples: np.ndarray, token_ids: Sequence[int]) -> np.ndarray:
        if self._fixed is not None:
            return np.array(self._fixed)
        present, _ = self._present_features(np.asarray(samples, dtype=np.float64), list(token_ids))
        if self._class_weights.shape[1] != present.size:
            raise ValueError(
                f"classifier weights cover {self._class_weights.shape[1]} features, "
                f"geometry has {present.size}"
            )
        logits = self._class_bases + self._class_weights @ present.astype(np.float64)
        shifted = np.exp(logits - logits.max())
        return shifted / shifted.sum()
