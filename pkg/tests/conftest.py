"""Shared fixtures: tiny corpora with real WAV files on disk.

Also prints one [ACCEPTANCE PASS/FAIL] line per acceptance criterion."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from modshap import AudioClip, save_wav


def _write_corpus(
    root: Path,
    n_questions: int = 3,
    rate: int = 16000,
    seconds: float = 0.25,
    short: bool = False,
) -> Path:
    audio_dir = root / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(1234)
    questions = []
    if short:
        # Minimal token counts so tiny clips keep n within the exact cap.
        option_sets = [[("A", "Bell"), ("B", "Horn")]]
        texts = ["What rings ?"]
        answers = ["B"]
        sources = ["MusicCaps"]
    else:
        option_sets = [
            [("A", "Doorbell"), ("B", "Horn"), ("C", "Whistle"), ("D", "Applause")],
            [("A", "Piano"), ("B", "Doorbell"), ("C", "Guitar"), ("D", "Drums")],
            [("A", "Siren"), ("B", "Doorbell"), ("C", "Bells"), ("D", "Claps")],
            [("A", "Violin"), ("B", "Doorbell"), ("C", "Flute"), ("D", "Cello")],
        ]
        texts = [
            "Which sound interrupts the melody near the end ?",
            "What instrument starts playing at the beginning ?",
            "Which effect can be heard over the drums ?",
            "What rings twice during the chorus ?",
        ]
        answers = ["A", "B", "B", "D"]
        sources = ["MusicCaps", "MusicCaps", "SDD", "MusicCaps"]
    for k in range(n_questions):
        name = f"clip{k}.wav"
        n = int(rate * seconds)
        samples = rng.uniform(0.1, 0.8, size=n) * rng.choice([-1.0, 1.0], size=n)
        save_wav(audio_dir / name, AudioClip(samples=samples, sample_rate_hz=rate))
        questions.append(
            {
                "id": f"q{k:03d}",
                "audio": f"audio/{name}",
                "question": texts[k % len(texts)],
                "options": [{"letter": L, "text": t} for L, t in option_sets[k % len(option_sets)]],
                "answer": answers[k % len(answers)],
                "category": "sound event",
                "source": sources[k % len(sources)],
            }
        )
    dataset = root / "corpus.json"
    dataset.write_text(json.dumps({"questions": questions}, indent=2), encoding="utf-8")
    return dataset


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::", 1)[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"[ACCEPTANCE {outcome}] {name}", flush=True)


@pytest.fixture
def tiny_corpus(tmp_path: Path) -> Path:
    """Three questions with on-disk WAV audio; returns the dataset path."""
    return _write_corpus(tmp_path, n_questions=3)


@pytest.fixture
def corpus_factory(tmp_path: Path):
    def build(
        n_questions: int = 3,
        rate: int = 16000,
        seconds: float = 0.25,
        name: str = "corpus",
        short: bool = False,
    ) -> Path:
        return _write_corpus(
            tmp_path / name, n_questions=n_questions, rate=rate, seconds=seconds, short=short
        )

    return build
