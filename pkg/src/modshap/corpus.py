"""Multiple-choice corpus loading, prompt construction, and answer matching."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Literal

from .errors import CorpusSchemaError, MissingExampleError

MC_PI = "mc-pi"
MC_NPI = "mc-npi"
PromptMode = Literal["mc-pi", "mc-npi"]

DEFAULT_SYSTEM_INSTRUCTION = "You're a reliable assistant, follow these instructions."
DEFAULT_QUESTION_BLOCK_FORMAT = "Question: {question}\n{options}"
DEFAULT_IN_CONTEXT_EXAMPLE = (
    "Question: Which instrument plays the opening melody?\n"
    "(A) Violin\n(B) Trumpet\n(C) Piano\n(D) Flute\n"
    "Answer: (C) Piano"
)


@dataclass(frozen=True)
class McOption:
    letter: str
    text: str


@dataclass(frozen=True)
class McQuestion:
    question_id: str
    audio_path: Path
    question_text: str
    options: tuple[McOption, ...]
    correct_letter: str
    category: str | None = None
    source: str | None = None


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt layout. An in-context example is mandatory for mc-pi prompts."""

    system_instruction: str = DEFAULT_SYSTEM_INSTRUCTION
    in_context_example: str | None = DEFAULT_IN_CONTEXT_EXAMPLE
    question_block_format: str = DEFAULT_QUESTION_BLOCK_FORMAT


def load_corpus(
    dataset_path: str | Path,
    audio_root: str | Path | None = None,
    source_filter: str | Callable[[McQuestion], bool] | None = None,
) -> tuple[list[McQuestion], list[str]]:
    """Load and validate a corpus file.

    Returns the questions plus a warning list naming questions whose audio
    file is missing (those are excluded). Raises
    :class:`CorpusSchemaError` naming the first offending record.
    """
    dataset_path = Path(dataset_path)
    root = Path(audio_root) if audio_root is not None else dataset_path.parent
    try:
        payload = json.loads(dataset_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CorpusSchemaError(f"corpus file {dataset_path} does not exist")
    except json.JSONDecodeError as exc:
        raise CorpusSchemaError(f"corpus file {dataset_path} is not valid JSON: {exc}")
    if not isinstance(payload, dict) or "questions" not in payload:
        raise CorpusSchemaError(f"{dataset_path}: top level must be an object with a 'questions' list")
    records = payload["questions"]
    if not isinstance(records, list) or not records:
        raise CorpusSchemaError(f"{dataset_path}: 'questions' must be a non-empty list")

    questions: list[McQuestion] = []
    warnings: list[str] = []
    seen_ids: set[str] = set()
    for index, record in enumerate(records):
        where = f"questions[{index}]"
        question = _parse_record(record, where, root)
        if question.question_id in seen_ids:
            raise CorpusSchemaError(f"{where}.id: duplicate question id {question.question_id!r}")
        seen_ids.add(question.question_id)
        if not _passes_filter(question, source_filter):
            continue
        if not question.audio_path.exists():
            warnings.append(f"{question.question_id}: audio file missing at {question.audio_path}")
            continue
        questions.append(question)
    return questions, warnings


def _passes_filter(question: McQuestion, source_filter) -> bool:
    if source_filter is None:
        return True
    if callable(source_filter):
        return bool(source_filter(question))
    return question.source == source_filter


def _parse_record(record, where: str, root: Path) -> McQuestion:
    if not isinstance(record, dict):
        raise CorpusSchemaError(f"{where}: must be an object")

    def need(key: str, kind: type):
        if key not in record:
            raise CorpusSchemaError(f"{where}.{key}: missing")
        value = record[key]
        if not isinstance(value, kind) or isinstance(value, bool):
            raise CorpusSchemaError(f"{where}.{key}: expected {kind.__name__}")
        return value

    qid = need("id", str)
    audio = need("audio", str)
    text = need("question", str)
    raw_options = need("options", list)
    answer = need("answer", str)
    if len(raw_options) < 2:
        raise CorpusSchemaError(f"{where}.options: need at least two options")
    options = []
    letters = []
    for opt_index, raw in enumerate(raw_options):
        opt_where = f"{where}.options[{opt_index}]"
        if not isinstance(raw, dict) or "letter" not in raw or "text" not in raw:
            raise CorpusSchemaError(f"{opt_where}: must be an object with letter and text")
        letter, opt_text = str(raw["letter"]), str(raw["text"])
        if letter in letters:
            raise CorpusSchemaError(f"{opt_where}.letter: duplicate letter {letter!r}")
        letters.append(letter)
        options.append(McOption(letter=letter, text=opt_text))
    if answer not in letters:
        raise CorpusSchemaError(f"{where}.answer: {answer!r} is not one of the option letters {letters}")
    category = record.get("category")
    source = record.get("source")
    if category is not None and not isinstance(category, str):
        raise CorpusSchemaError(f"{where}.category: expected string or null")
    if source is not None and not isinstance(source, str):
        raise CorpusSchemaError(f"{where}.source: expected string or null")
    return McQuestion(
        question_id=qid,
        audio_path=root / audio,
        question_text=text,
        options=tuple(options),
        correct_letter=answer,
        category=category,
        source=source,
    )


def format_options(options: tuple[McOption, ...]) -> str:
    return "\n".join(f"({opt.letter}) {opt.text}" for opt in options)


def build_prompt(question: McQuestion, template: PromptTemplate, mode: PromptMode) -> str:
    """Assemble the prompt string the model tokenizes.

    mc-pi prepends the template's in-context example; mc-npi omits it. Only
    the final question block is wrapped in question/answer markers, so the
    example and instructions never become maskable.
    """
    if mode not in (MC_PI, MC_NPI):
        raise ValueError(f"unknown prompt mode {mode!r}")
    parts = [template.system_instruction, "<audio>"]
    if mode == MC_PI:
        if not template.in_context_example:
            raise MissingExampleError("mc-pi prompt requested but the template has no in-context example")
        parts.append(template.in_context_example)
    block = template.question_block_format.format(
        question=question.question_text, options=format_options(question.options)
    )
    parts.append(f"<|question|> {block} <|answer|>")
    return "\n".join(parts)


def match_answer(answer_text: str, options: tuple[McOption, ...]) -> str | None:
    """Map free-form answer text onto an option letter.

    Stage one looks for standalone option letters in the forms ``(B)``,
    ``B)``, ``B.`` (case-insensitive) or a bare uppercase letter token; stage
    two falls back to a unique case-insensitive substring match of an
    option's text. More than one distinct hit within a stage is a tie and
    yields ``None`` (unparsed), as does no hit at all.
    """
    letters_found: set[str] = set()
    for opt in options:
        escaped = re.escape(opt.letter)
        decorated = rf"(?<![A-Za-z0-9])(?:\({escaped}\)|{escaped}\)|{escaped}\.)(?![A-Za-z0-9])"
        if re.search(decorated, answer_text, flags=re.IGNORECASE):
            letters_found.add(opt.letter)
            continue
        bare = rf"(?<![A-Za-z0-9]){escaped}(?![A-Za-z0-9.)])"
        if re.search(bare, answer_text):
            letters_found.add(opt.letter)
    if letters_found:
        return letters_found.pop() if len(letters_found) == 1 else None

    lowered = answer_text.lower()
    substring_hits = [opt.letter for opt in options if opt.text and opt.text.lower() in lowered]
    if len(substring_hits) == 1:
        return substring_hits[0]
    return None
