"""Plot emitter: highlight threshold, waveform strips, sidecar content."""

import json

import numpy as np
import pytest

from modshap import MissingAttributionError, emit_plot, plot_payload
from modshap.plotting import select_answer_token


def crafted_artifact(values, n_audio, question_tokens=None):
    values = np.asarray(values, dtype=np.float64)
    n_text = values.shape[0] - n_audio
    windows = [[i * 100, (i + 1) * 100] for i in range(n_audio)]
    return {
        "schema": "modshap/question-result/v1",
        "question_id": "crafted",
        "answer_text": "(B) Doorbell",
        "audio_path": None,
        "question_tokens": question_tokens
        or [{"position": 5 + k, "text": f"word{k}"} for k in range(n_text)],
        "attribution": {
            "values": values.tolist(),
            "n_audio": n_audio,
            "n_text": n_text,
            "audio_windows": windows,
            "text_feature_map": list(range(5, 5 + n_text)),
            "estimator": {"method": "exact", "m": None, "seed": None, "antithetic": None},
        },
    }


class TestHighlightRule:
    def test_threshold_is_eighty_percent_inclusive(self):
        # Text magnitudes 1.0, 0.79, 0.80, 0.3: exactly the >= 0.8 ones light up.
        values = [[0.2], [1.0], [0.79], [0.8], [0.3]]
        payload = plot_payload(crafted_artifact(values, n_audio=1))
        highlights = [t["highlight"] for t in payload["tokens"]]
        assert highlights == [True, False, True, False]
        assert payload["highlight_threshold"] == pytest.approx(0.8)

    def test_negative_magnitudes_count(self):
        values = [[0.0], [-1.0], [0.85], [0.2]]
        payload = plot_payload(crafted_artifact(values, n_audio=1))
        assert [t["highlight"] for t in payload["tokens"]] == [True, True, False]

    def test_all_zero_matrix_highlights_nothing(self):
        payload = plot_payload(crafted_artifact(np.zeros((5, 2)), n_audio=2))
        assert not any(t["highlight"] for t in payload["tokens"])
        assert all(v == 0.0 for v in payload["strips"]["absolute"])


class TestStrips:
    def test_single_nonzero_window_darkens_exactly_one(self):
        values = [[0.0], [0.7], [0.0], [0.5]]
        payload = plot_payload(crafted_artifact(values, n_audio=3))
        assert payload["strips"]["absolute"] == [0.0, 0.7, 0.0]
        assert payload["strips"]["positive"] == [0.0, 0.7, 0.0]
        assert payload["strips"]["negative"] == [0.0, 0.0, 0.0]

    def test_signed_separation(self):
        values = [[0.5], [-0.25], [0.0], [1.0]]
        payload = plot_payload(crafted_artifact(values, n_audio=3))
        assert payload["strips"]["absolute"] == [0.5, 0.25, 0.0]
        assert payload["strips"]["positive"] == [0.5, 0.0, 0.0]
        assert payload["strips"]["negative"] == [0.0, -0.25, 0.0]


class TestTokenSelection:
    def test_default_token_is_largest_total_magnitude(self):
        values = np.array([[0.1, 2.0], [0.2, 1.0], [0.0, 0.5]])
        assert select_answer_token(values) == 1
        payload = plot_payload(crafted_artifact(values, n_audio=1))
        assert payload["selected_token_index"] == 1

    def test_explicit_token_index(self):
        values = np.array([[0.1, 2.0], [0.4, 1.0], [0.3, 0.5]])
        payload = plot_payload(crafted_artifact(values, n_audio=1), token=0)
        assert payload["selected_token_index"] == 0
        assert payload["strips"]["absolute"] == [0.1]

    def test_out_of_range_token_rejected(self):
        with pytest.raises(ValueError):
            plot_payload(crafted_artifact(np.ones((3, 2)), n_audio=1), token=5)

    def test_summed_view(self):
        values = np.array([[0.5, -0.5], [1.0, 1.0], [0.25, 0.5]])
        payload = plot_payload(crafted_artifact(values, n_audio=1), token_view="summed")
        assert payload["strips"]["absolute"] == [1.0]
        assert payload["strips"]["positive"] == [0.5]
        assert payload["strips"]["negative"] == [-0.5]
        assert payload["tokens"][0]["value"] == 2.0


class TestEmitPlot:
    def test_writes_vector_figure_and_sidecar(self, tmp_path):
        artifact = crafted_artifact([[0.4], [1.0], [0.9]], n_audio=1)
        out = tmp_path / "fig.svg"
        payload = emit_plot(artifact, out)
        assert out.exists() and out.stat().st_size > 0
        assert b"<svg" in out.read_bytes()[:500]
        sidecar = json.loads((tmp_path / "fig.svg.json").read_text())
        assert sidecar == payload

    def test_missing_attribution_raises(self, tmp_path):
        artifact = {"question_id": "x", "attribution": None}
        with pytest.raises(MissingAttributionError):
            emit_plot(artifact, tmp_path / "fig.svg")

    def test_real_run_artifact_plots(self, tiny_corpus, tmp_path):
        from modshap import PromptTemplate, RunConfig, load_corpus, run_corpus
        from modshap import SyntheticEndpoint, SyntheticModelSpec
        from modshap.runner import load_run_artifacts

        questions, _ = load_corpus(tiny_corpus)
        run_corpus(
            questions[:1],
            SyntheticEndpoint(SyntheticModelSpec(kind="additive")),
            PromptTemplate(),
            RunConfig(),
            tmp_path / "run",
        )
        artifact = load_run_artifacts([tmp_path / "run"])[0]
        payload = emit_plot(artifact, tmp_path / "q.svg")
        assert len(payload["tokens"]) == artifact["attribution"]["n_text"]
        assert len(payload["strips"]["absolute"]) == artifact["attribution"]["n_audio"]
