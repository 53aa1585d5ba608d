"""Feature-space construction and coalition masking.

The audio window count adapts to the number of maskable text tokens so both
modalities enter the attribution with balanced feature counts; windows shrink
to per-sample granularity when the clip is too short. Masking is pure: inputs
are never mutated, audio windows outside the coalition are zeroed sample-wise
and maskable tokens outside the coalition are replaced by the model's mask
token. Protected and instruction tokens are always copied verbatim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import CoalitionIndexError, EmptyMaskableSetError
from .types import AudioClip, Coalition, FeaturePartition, TokenizedPrompt

# Marker surfaces that must survive masking: audio indicators signalling that
# audio features follow, and the question/answer indicators.
DEFAULT_PROTECTED_TOKEN_SURFACES = frozenset(
    {"<audio>", "<audio_padding>", "#Audio", "<|question|>", "<|answer|>"}
)

AudioMaskKind = Literal["zeros", "white_noise", "neighbor_average"]


@dataclass(frozen=True)
class MaskPolicy:
    """What masking substitutes for absent features.

    Only zero-masking of audio is implemented; ``white_noise`` and
    ``neighbor_average`` are reserved variants for alternative audio masks.
    """

    mask_token_id: int
    audio_mask_kind: AudioMaskKind = "zeros"
    protected_token_surfaces: frozenset[str] = field(default=DEFAULT_PROTECTED_TOKEN_SURFACES)

    def __post_init__(self) -> None:
        if self.audio_mask_kind != "zeros":
            raise NotImplementedError(
                f"audio mask kind {self.audio_mask_kind!r} is a reserved variant; only 'zeros' is implemented"
            )
        object.__setattr__(
            self, "protected_token_surfaces", frozenset(self.protected_token_surfaces)
        )


def plan_audio_windows(clip_len_samples: int, n_text: int) -> list[tuple[int, int]]:
    """Split ``[0, clip_len_samples)`` into ``min(n_text, clip_len_samples)`` windows.

    All windows hold ``clip_len_samples // count`` samples except the last,
    which absorbs the remainder. Clips shorter than ``n_text`` samples degrade
    to one window per sample.
    """
    if clip_len_samples < 1:
        raise ValueError(f"clip length must be >= 1 sample, got {clip_len_samples}")
    if n_text < 1:
        raise ValueError(f"text feature count must be >= 1, got {n_text}")
    count = min(n_text, clip_len_samples)
    base = clip_len_samples // count
    starts = [i * base for i in range(count)]
    ends = starts[1:] + [clip_len_samples]
    return list(zip(starts, ends))


def select_maskable_tokens(prompt: TokenizedPrompt, policy: MaskPolicy) -> list[int]:
    """Positions eligible for text masking, in prompt order.

    Only question-span tokens qualify; instruction tokens and protected
    surfaces never do. Raises :class:`EmptyMaskableSetError` when nothing
    qualifies, which signals a malformed prompt.
    """
    q0, q1 = prompt.question_span
    i0, i1 = prompt.instruction_span
    positions = []
    for pos in range(q0, q1):
        if i0 <= pos < i1:
            continue
        token = prompt.tokens[pos]
        if not token.maskable:
            continue
        if token.text.strip() in policy.protected_token_surfaces:
            continue
        positions.append(pos)
    if not positions:
        raise EmptyMaskableSetError(
            "no maskable token in the question span (question absent or fully protected)"
        )
    return positions


def build_partition(clip: AudioClip, prompt: TokenizedPrompt, policy: MaskPolicy) -> FeaturePartition:
    """Build the audio-first feature partition for one (clip, prompt) pair."""
    if len(clip) == 0:
        raise ValueError("cannot build a partition over an empty clip")
    positions = select_maskable_tokens(prompt, policy)
    windows = plan_audio_windows(len(clip), len(positions))
    return FeaturePartition(tuple(windows), tuple(positions))


def apply_coalition(
    clip: AudioClip,
    prompt: TokenizedPrompt,
    partition: FeaturePartition,
    coalition: Coalition,
    policy: MaskPolicy,
) -> tuple[np.ndarray, list[int]]:
    """Materialize the masked inputs for one coalition.

    Returns a fresh ``(samples, token_ids)`` pair; everything the coalition
    keeps is bit-identical to the originals.
    """
    n = partition.n_features
    out_of_range = [j for j in coalition if not 0 <= j < n]
    if out_of_range:
        raise CoalitionIndexError(
            f"coalition references features {sorted(out_of_range)} outside [0, {n})"
        )
    samples = np.array(clip.samples, dtype=np.float64)
    for j, (start, end) in enumerate(partition.audio_windows):
        if j not in coalition:
            samples[start:end] = 0.0
    token_ids = prompt.token_ids
    for k, pos in enumerate(partition.text_feature_map):
        if (partition.n_audio + k) not in coalition:
            token_ids[pos] = policy.mask_token_id
    return samples, token_ids
