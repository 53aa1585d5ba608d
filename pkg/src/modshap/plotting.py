"""Attribution plots: highlighted question tokens plus waveform strips.

The figure shows the question tokens shaded by attribution magnitude, with
tokens at or above 80% of the maximum flagged as highlights, and three
waveform strips colored per window by absolute, positive-only, and
negative-only attribution for the selected answer token. Darker means larger
magnitude. A machine-readable sidecar JSON with the same content is written
next to the figure.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .audio import load_wav
from .errors import MissingAttributionError

HIGHLIGHT_FRACTION = 0.8


def select_answer_token(values: np.ndarray) -> int:
    """Default plot target: the answer token with the largest total |phi|."""
    return int(np.argmax(np.abs(values).sum(axis=0)))


def plot_payload(artifact: dict, token: int | str = "auto", token_view: str = "selected") -> dict:
    """Compute the sidecar payload for one persisted question artifact."""
    stored = artifact.get("attribution")
    if stored is None:
        raise MissingAttributionError(
            f"question {artifact.get('question_id')!r} has no persisted attribution"
        )
    values = np.asarray(stored["values"], dtype=np.float64)
    n_audio = int(stored["n_audio"])
    token_count = values.shape[1]

    if token == "auto":
        selected = select_answer_token(values)
    else:
        selected = int(token)
        if not 0 <= selected < token_count:
            raise ValueError(f"token index {selected} outside [0, {token_count})")

    if token_view == "selected":
        text_magnitudes = np.abs(values[n_audio:, selected])
        audio_signed = values[:n_audio, selected]
        strip_abs = np.abs(audio_signed)
        strip_pos = np.maximum(audio_signed, 0.0)
        strip_neg = np.minimum(audio_signed, 0.0)
    elif token_view == "summed":
        text_magnitudes = np.abs(values[n_audio:]).sum(axis=1)
        audio_rows = values[:n_audio]
        strip_abs = np.abs(audio_rows).sum(axis=1)
        strip_pos = np.maximum(audio_rows, 0.0).sum(axis=1)
        strip_neg = np.minimum(audio_rows, 0.0).sum(axis=1)
    else:
        raise ValueError(f"unknown token view {token_view!r}")

    max_magnitude = float(text_magnitudes.max()) if text_magnitudes.size else 0.0
    threshold = HIGHLIGHT_FRACTION * max_magnitude
    question_tokens = artifact.get("question_tokens") or []
    tokens_payload = []
    for k, magnitude in enumerate(text_magnitudes):
        entry = question_tokens[k] if k < len(question_tokens) else {"position": None, "text": f"t{k}"}
        tokens_payload.append(
            {
                "position": entry["position"],
                "text": entry["text"],
                "value": float(magnitude),
                "highlight": bool(max_magnitude > 0.0 and magnitude >= threshold),
            }
        )

    return {
        "schema": "modshap/plot-sidecar/v1",
        "question_id": artifact.get("question_id"),
        "answer_text": artifact.get("answer_text"),
        "selected_token_index": selected,
        "token_view": token_view,
        "highlight_threshold": threshold,
        "tokens": tokens_payload,
        "audio_windows": [[int(s), int(e)] for s, e in stored["audio_windows"]],
        "strips": {
            "absolute": [float(x) for x in strip_abs],
            "positive": [float(x) for x in strip_pos],
            "negative": [float(x) for x in strip_neg],
        },
    }


def emit_plot(
    artifact: dict,
    output_path: str | Path,
    token: int | str = "auto",
    token_view: str = "selected",
) -> dict:
    """Render the figure and sidecar JSON; returns the sidecar payload."""
    payload = plot_payload(artifact, token=token, token_view=token_view)
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)

    waveform = _try_load_waveform(artifact)
    fig = _render_figure(payload, waveform)
    fig.savefig(output_path)
    plt.close(fig)

    sidecar_path = output_path.with_suffix(output_path.suffix + ".json")
    sidecar_path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    return payload


def _try_load_waveform(artifact: dict) -> np.ndarray | None:
    path = artifact.get("audio_path")
    if not path or not Path(path).exists():
        return None
    try:
        return load_wav(path).samples
    except Exception:
        return None


def _render_figure(payload: dict, waveform: np.ndarray | None):
    tokens = payload["tokens"]
    windows = payload["audio_windows"]
    strips = payload["strips"]
    clip_len = windows[-1][1] if windows else 1

    fig, axes = plt.subplots(
        4, 1, figsize=(max(8.0, len(tokens) * 0.55), 7.0),
        gridspec_kw={"height_ratios": [1.2, 1, 1, 1]},
    )
    ax_tokens, ax_abs, ax_pos, ax_neg = axes

    _draw_token_row(ax_tokens, tokens, payload["highlight_threshold"])
    title = f"question {payload['question_id']} / answer token {payload['selected_token_index']}"
    if payload.get("answer_text"):
        title += f" of {payload['answer_text']!r}"
    ax_tokens.set_title(title, fontsize=10)

    for ax, key, cmap in ((ax_abs, "absolute", "Greys"), (ax_pos, "positive", "Greens"), (ax_neg, "negative", "Purples")):
        _draw_strip(ax, windows, strips[key], waveform, clip_len, cmap)
        ax.set_ylabel(key, fontsize=9)
    ax_neg.set_xlabel("sample")
    fig.tight_layout()
    return fig


def _draw_token_row(ax, tokens: list[dict], threshold: float) -> None:
    ax.set_xlim(0, max(1, len(tokens)))
    ax.set_ylim(0, 1)
    ax.axis("off")
    peak = max((t["value"] for t in tokens), default=0.0)
    for k, token in enumerate(tokens):
        shade = 0.0 if peak == 0 else token["value"] / peak
        color = "black" if token["highlight"] else (0.55, 0.55, 0.55)
        ax.text(
            k + 0.5,
            0.45,
            token["text"],
            ha="center",
            va="center",
            rotation=45,
            fontsize=8,
            color=color,
            fontweight="bold" if token["highlight"] else "normal",
            bbox={"boxstyle": "round,pad=0.15", "facecolor": (1 - 0.5 * shade,) * 3, "edgecolor": "none"},
        )


def _draw_strip(ax, windows, values, waveform, clip_len: int, cmap_name: str) -> None:
    cmap = plt.get_cmap(cmap_name)
    magnitudes = np.abs(np.asarray(values, dtype=np.float64))
    peak = magnitudes.max() if magnitudes.size else 0.0
    for (start, end), magnitude in zip(windows, magnitudes):
        shade = 0.0 if peak == 0 else magnitude / peak
        ax.axvspan(start, end, color=cmap(0.1 + 0.85 * shade), lw=0)
    if waveform is not None and waveform.size:
        x = np.linspace(0, clip_len, waveform.size, endpoint=False)
        ax.plot(x, waveform, color="steelblue", lw=0.4, alpha=0.8)
        ax.set_ylim(min(-1.05, waveform.min()), max(1.05, waveform.max()))
    ax.set_xlim(0, clip_len)
    ax.set_yticks([])
