"""Corpus loading, prompt construction, and answer matching."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modshap import (
    CorpusSchemaError,
    McOption,
    MissingExampleError,
    PromptTemplate,
    build_prompt,
    load_corpus,
    match_answer,
)
from modshap.corpus import MC_NPI, MC_PI, DEFAULT_SYSTEM_INSTRUCTION

OPTIONS = (
    McOption("A", "Doorbell"),
    McOption("B", "Horn"),
    McOption("C", "Whistle"),
    McOption("D", "Applause"),
)


class TestLoadCorpus:
    def test_loads_and_resolves_audio(self, tiny_corpus):
        questions, warnings = load_corpus(tiny_corpus)
        assert len(questions) == 3
        assert warnings == []
        assert all(q.audio_path.exists() for q in questions)

    def test_source_filter(self, tiny_corpus):
        questions, _ = load_corpus(tiny_corpus, source_filter="MusicCaps")
        assert {q.source for q in questions} == {"MusicCaps"}
        assert len(questions) == 2

    def test_callable_filter(self, tiny_corpus):
        questions, _ = load_corpus(tiny_corpus, source_filter=lambda q: q.correct_letter == "B")
        assert all(q.correct_letter == "B" for q in questions)

    def test_missing_audio_warned_and_excluded(self, tiny_corpus):
        payload = json.loads(tiny_corpus.read_text())
        payload["questions"][0]["audio"] = "audio/nowhere.wav"
        tiny_corpus.write_text(json.dumps(payload))
        questions, warnings = load_corpus(tiny_corpus)
        assert len(questions) == 2
        assert len(warnings) == 1 and "nowhere.wav" in warnings[0]

    def test_empty_file_is_schema_error(self, tmp_path):
        bad = tmp_path / "empty.json"
        bad.write_text("")
        with pytest.raises(CorpusSchemaError):
            load_corpus(bad)

    def test_answer_outside_options_names_the_record(self, tiny_corpus):
        payload = json.loads(tiny_corpus.read_text())
        payload["questions"][1]["answer"] = "E"
        tiny_corpus.write_text(json.dumps(payload))
        with pytest.raises(CorpusSchemaError, match=r"questions\[1\]\.answer"):
            load_corpus(tiny_corpus)

    def test_duplicate_option_letter_rejected(self, tiny_corpus):
        payload = json.loads(tiny_corpus.read_text())
        payload["questions"][2]["options"][1]["letter"] = "A"
        tiny_corpus.write_text(json.dumps(payload))
        with pytest.raises(CorpusSchemaError, match=r"questions\[2\]\.options\[1\]"):
            load_corpus(tiny_corpus)

    def test_missing_field_named(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"questions": [{"id": "x"}]}))
        with pytest.raises(CorpusSchemaError, match=r"questions\[0\]\.audio"):
            load_corpus(bad)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusSchemaError):
            load_corpus(tmp_path / "absent.json")


class TestBuildPrompt:
    def make_question(self, tiny_corpus):
        questions, _ = load_corpus(tiny_corpus)
        return questions[0]

    def test_npi_has_instruction_and_question_only(self, tiny_corpus):
        q = self.make_question(tiny_corpus)
        text = build_prompt(q, PromptTemplate(), MC_NPI)
        assert text.startswith(DEFAULT_SYSTEM_INSTRUCTION)
        assert "<|question|>" in text and "<|answer|>" in text
        assert q.question_text in text
        for opt in q.options:
            assert f"({opt.letter}) {opt.text}" in text

    def test_pi_strictly_longer_than_npi(self, tiny_corpus):
        q = self.make_question(tiny_corpus)
        template = PromptTemplate()
        pi = build_prompt(q, template, MC_PI)
        npi = build_prompt(q, template, MC_NPI)
        assert len(pi.encode()) > len(npi.encode())
        assert template.in_context_example in pi
        assert template.in_context_example not in npi

    def test_example_outside_question_markers(self, tiny_corpus):
        q = self.make_question(tiny_corpus)
        pi = build_prompt(q, PromptTemplate(), MC_PI)
        assert pi.index("<|question|>") > pi.index("Violin")

    def test_missing_example_raises(self, tiny_corpus):
        q = self.make_question(tiny_corpus)
        with pytest.raises(MissingExampleError):
            build_prompt(q, PromptTemplate(in_context_example=None), MC_PI)

    def test_unknown_mode_rejected(self, tiny_corpus):
        q = self.make_question(tiny_corpus)
        with pytest.raises(ValueError):
            build_prompt(q, PromptTemplate(), "mc-xx")


class TestMatchAnswer:
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("The answer is (B) Doorbell", "B"),
            ("(b) seems right", "B"),
            ("B) Horn", "B"),
            ("I pick C.", "C"),
            ("D", "D"),
            ("A or C", None),
            ("definitely (A), not (B)", None),
            ("", None),
            ("no letters here at all", None),
        ],
    )
    def test_letter_stage(self, text, expected):
        assert match_answer(text, OPTIONS) == expected

    def test_substring_stage_unique(self):
        assert match_answer("It sounds like a doorbell ringing", OPTIONS) == "A"

    def test_substring_stage_tie_is_unparsed(self):
        options = (McOption("A", "bell"), McOption("B", "doorbell"))
        assert match_answer("I hear a doorbell", options) is None

    def test_exact_option_text_without_letter(self):
        assert match_answer("Horn", OPTIONS) == "B"

    def test_letter_stage_wins_over_substring(self):
        # (C) fires in stage one even though option A's text also appears.
        assert match_answer("(C) because the doorbell is wrong", OPTIONS) == "C"

    def test_bare_lowercase_letter_is_not_an_article_match(self):
        # "a" as an article must not count as option A.
        assert match_answer("it is a whistle", OPTIONS) == "C"

    def test_letters_inside_words_ignored(self):
        assert match_answer("Bravo Delta", OPTIONS) is None

    @settings(max_examples=150, deadline=None)
    @given(text=st.text(max_size=120))
    def test_total_and_returns_valid_letter(self, text):
        result = match_answer(text, OPTIONS)
        assert result is None or result in {"A", "B", "C", "D"}
