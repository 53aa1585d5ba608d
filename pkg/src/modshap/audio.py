"""Waveform loading and rate/length conditioning.

WAV input supports PCM 16-bit and IEEE float 32-bit RIFF files at any rate;
stereo is downmixed by channel averaging. Resampling is linear interpolation,
which preserves duration within one sample period and is exact for constant
signals.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .types import AudioClip


def load_wav(path: str | os.PathLike) -> AudioClip:
    """Read a RIFF WAV file into a mono clip with amplitudes in [-1, 1]."""
    rate, data = wavfile.read(path)
    if data.ndim == 2:
        data = data.mean(axis=1)
    elif data.ndim != 1:
        raise ValueError(f"unsupported WAV shape {data.shape} in {path}")
    if np.issubdtype(data.dtype, np.integer):
        scale = float(np.iinfo(data.dtype).max) + 1.0
        samples = data.astype(np.float64) / scale
    else:
        samples = data.astype(np.float64)
    return AudioClip(samples=samples, sample_rate_hz=int(rate))


def save_wav(path: str | os.PathLike, clip: AudioClip) -> None:
    """Write a clip as 32-bit float WAV (used by fixtures and the stub tooling)."""
    wavfile.write(path, clip.sample_rate_hz, clip.samples.astype(np.float32))


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Linear-interpolation resampling to the target rate.

    Identity (bit-for-bit) when the rates already match.
    """
    if target_rate_hz <= 0:
        raise ValueError(f"target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == clip.sample_rate_hz:
        return clip
    src_len = len(clip)
    new_len = max(1, round(src_len * target_rate_hz / clip.sample_rate_hz)) if src_len else 0
    if src_len == 0:
        return AudioClip(samples=np.zeros(0), sample_rate_hz=target_rate_hz)
    positions = np.arange(new_len) * (clip.sample_rate_hz / target_rate_hz)
    samples = np.interp(positions, np.arange(src_len), clip.samples)
    return AudioClip(samples=samples, sample_rate_hz=target_rate_hz)


def truncate_clip(clip: AudioClip, max_seconds: float) -> AudioClip:
    """Keep the first ``max_seconds`` of audio; identity if already shorter."""
    if max_seconds <= 0:
        raise ValueError(f"max_seconds must be positive, got {max_seconds}")
    keep = int(round(max_seconds * clip.sample_rate_hz))
    if keep >= len(clip):
        return clip
    return AudioClip(samples=clip.samples[:keep], sample_rate_hz=clip.sample_rate_hz)
