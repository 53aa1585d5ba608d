"""Modality aggregation: from per-feature attributions to audio/text shares.

Signed attributions cancel, so each modality's contribution is the sum of
absolute per-feature, per-token values; the audio share (A-SHAP) normalizes
that against the combined mass and the text share is its complement. A
matrix with zero total mass has no defined share, which callers must treat
as distinct from an audio share of zero.
"""

from __future__ import annotations

import numpy as np

from .types import AttributionMatrix, ModalityScore


def modality_contribution(attribution: AttributionMatrix) -> ModalityScore:
    """Aggregate an attribution matrix into modality totals and shares."""
    if attribution.partition is None:
        raise ValueError("attribution matrix carries no partition; cannot split modalities")
    n_audio = attribution.partition.n_audio
    magnitudes = np.abs(attribution.values)
    audio_mass = float(magnitudes[:n_audio].sum())
    text_mass = float(magnitudes[n_audio:].sum())
    total = audio_mass + text_mass
    if total == 0.0:
        return ModalityScore(audio_mass, text_mass, a_shap=None, t_shap=None)
    a_shap = audio_mass / total
    return ModalityScore(audio_mass, text_mass, a_shap=a_shap, t_shap=1.0 - a_shap)
