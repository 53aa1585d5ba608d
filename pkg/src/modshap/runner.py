"""Per-question attribution pipeline, artifact persistence, and aggregation.

One JSON artifact per question is written under the run directory so reports
and plots can be rebuilt without re-querying the model. Per-question failures
are captured in the result stream rather than aborting the run; they are
excluded from accuracy and share aggregates but tallied separately.
"""

from __future__ import annotations

import json
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Literal

import numpy as np

from .audio import load_wav, resample, truncate_clip
from .corpus import McQuestion, PromptTemplate, build_prompt, match_answer
from .endpoints import ModelEndpoint, mask_policy_from
from .masking import build_partition
from .metrics import modality_contribution
from .scoring import GenerationScoringContext, baseline_answer, generation_value_fn
from .shapley import EstimatorConfig, estimate_attributions, evaluation_budget
from .types import AnswerTrace, AttributionMatrix, EstimatorMeta, FeaturePartition, ModalityScore

ARTIFACT_SCHEMA = "modshap/question-result/v1"
INTERVAL_LABEL = "1.96*SE (normal approximation)"

EstimatorChoice = Literal["auto", "exact", "permutation"]


@dataclass(frozen=True)
class RunConfig:
    """Everything a corpus run needs beyond the endpoint and the questions."""

    mode: str = "mc-npi"
    estimator: EstimatorChoice = "auto"
    m: int = 10
    seed: int = 0
    antithetic: bool = True
    exact_auto_cap: int = 12
    max_audio_seconds: float | None = None
    collapse_tokens: bool = False
    concurrency: int = 1

    def estimator_config_for(self, n_features: int) -> EstimatorConfig:
        if self.estimator == "exact":
            method = "exact"
        elif self.estimator == "permutation":
            method = "permutation"
        else:
            method = "exact" if n_features <= self.exact_auto_cap else "permutation"
        return EstimatorConfig(method=method, m=self.m, seed=self.seed, antithetic=self.antithetic)


@dataclass(frozen=True)
class QuestionResult:
    question: McQuestion
    model_id: str
    mode: str
    answer_text: str | None = None
    matched_letter: str | None = None
    is_correct: bool = False
    modality_score: ModalityScore | None = None
    attribution: AttributionMatrix | None = None
    trace: AnswerTrace | None = None
    question_token_texts: tuple[tuple[int, str], ...] = ()
    evaluation_count: int = 0
    wall_time_s: float = 0.0
    sample_rate_hz: int | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def run_question(
    question: McQuestion,
    endpoint: ModelEndpoint,
    template: PromptTemplate,
    config: RunConfig,
) -> QuestionResult:
    """Resample/truncate, tokenize, trace the baseline, attribute, and match."""
    started = time.perf_counter()
    info = endpoint.describe()
    policy = mask_policy_from(info)

    clip = resample(load_wav(question.audio_path), info.sample_rate_hz)
    limits = [x for x in (info.max_audio_seconds, config.max_audio_seconds) if x is not None]
    if limits:
        clip = truncate_clip(clip, min(limits))

    prompt = endpoint.tokenize(build_prompt(question, template, config.mode))
    trace = baseline_answer(endpoint, clip, prompt)
    partition = build_partition(clip, prompt, policy)
    ctx = GenerationScoringContext(
        trace=trace, clip=clip, prompt=prompt, partition=partition, policy=policy
    )
    value_fn = generation_value_fn(ctx, endpoint, collapse_tokens=config.collapse_tokens)
    estimator_config = config.estimator_config_for(partition.n_features)
    attribution = estimate_attributions(
        value_fn, partition.n_features, estimator_config, partition=partition
    )
    score = modality_contribution(attribution)
    matched = match_answer(trace.answer_text, question.options)

    return QuestionResult(
        question=question,
        model_id=info.model_id,
        mode=config.mode,
        answer_text=trace.answer_text,
        matched_letter=matched,
        is_correct=matched == question.correct_letter,
        modality_score=score,
        attribution=attribution,
        trace=trace,
        question_token_texts=tuple(
            (pos, prompt.tokens[pos].text) for pos in partition.text_feature_map
        ),
        evaluation_count=evaluation_budget(partition.n_features, estimator_config),
        wall_time_s=time.perf_counter() - started,
        sample_rate_hz=info.sample_rate_hz,
    )


def run_corpus(
    questions: Iterable[McQuestion],
    endpoint: ModelEndpoint,
    template: PromptTemplate,
    config: RunConfig,
    out_dir: str | Path | None = None,
    progress: Callable[[QuestionResult], None] | None = None,
) -> list[QuestionResult]:
    """Run every question through the pipeline, persisting artifacts as they land."""
    questions = list(questions)
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        model_id = endpoint.describe().model_id
        (out_path / "run.json").write_text(
            json.dumps(
                {
                    "schema": "modshap/run-config/v1",
                    "model_id": model_id,
                    "mode": config.mode,
                    "estimator": config.estimator,
                    "m": config.m,
                    "seed": config.seed,
                    "antithetic": config.antithetic,
                    "exact_auto_cap": config.exact_auto_cap,
                    "collapse_tokens": config.collapse_tokens,
                    "max_audio_seconds": config.max_audio_seconds,
                    "n_questions": len(questions),
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )

    def run_one(question: McQuestion) -> QuestionResult:
        try:
            result = run_question(question, endpoint, template, config)
        except Exception as exc:
            result = QuestionResult(
                question=question,
                model_id=_safe_model_id(endpoint),
                mode=config.mode,
                error=f"{type(exc).__name__}: {exc}",
            )
        if out_path is not None:
            write_artifact(out_path, result)
        if progress is not None:
            progress(result)
        return result

    if config.concurrency > 1:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            results = list(pool.map(run_one, questions))
    else:
        results = [run_one(q) for q in questions]
    return results


def _safe_model_id(endpoint: ModelEndpoint) -> str:
    try:
        return endpoint.describe().model_id
    except Exception:
        return "unknown"


def artifact_filename(question_id: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in question_id)
    if safe != question_id:
        safe = f"{safe}-{zlib.crc32(question_id.encode('utf-8')):08x}"
    return f"question-{safe}.json"


def result_to_artifact(result: QuestionResult) -> dict:
    artifact: dict = {
        "schema": ARTIFACT_SCHEMA,
        "question_id": result.question.question_id,
        "model_id": result.model_id,
        "mode": result.mode,
        "audio_path": str(result.question.audio_path),
        "correct_letter": result.question.correct_letter,
        "answer_text": result.answer_text,
        "matched_letter": result.matched_letter,
        "is_correct": result.is_correct,
        "evaluation_count": result.evaluation_count,
        "wall_time_s": result.wall_time_s,
        "sample_rate_hz": result.sample_rate_hz,
        "error": result.error,
        "modality_score": None,
        "attribution": None,
        "question_tokens": [
            {"position": pos, "text": text} for pos, text in result.question_token_texts
        ],
    }
    if result.modality_score is not None:
        s = result.modality_score
        artifact["modality_score"] = {
            "audio_contribution": s.audio_contribution,
            "text_contribution": s.text_contribution,
            "a_shap": s.a_shap,
            "t_shap": s.t_shap,
        }
    if result.attribution is not None and result.attribution.partition is not None:
        a = result.attribution
        artifact["attribution"] = {
            "values": [[float(x) for x in row] for row in a.values],
            "n_audio": a.partition.n_audio,
            "n_text": a.partition.n_text,
            "audio_windows": [[s, e] for s, e in a.partition.audio_windows],
            "text_feature_map": list(a.partition.text_feature_map),
            "estimator": {
                "method": a.estimator.method,
                "m": a.estimator.m,
                "seed": a.estimator.seed,
                "antithetic": a.estimator.antithetic,
            },
        }
    if result.trace is not None:
        artifact["answer_token_ids"] = list(result.trace.answer_token_ids)
        artifact["answer_positions"] = list(result.trace.answer_positions)
        artifact["baseline_logits"] = [float(x) for x in result.trace.baseline_logits]
    return artifact


def write_artifact(out_dir: Path, result: QuestionResult) -> Path:
    path = out_dir / artifact_filename(result.question.question_id)
    path.write_text(json.dumps(result_to_artifact(result), indent=2) + "\n", encoding="utf-8")
    return path


def attribution_from_artifact(artifact: dict) -> AttributionMatrix:
    """Rebuild the attribution matrix (with partition) stored in an artifact."""
    stored = artifact.get("attribution")
    if stored is None:
        raise ValueError(f"artifact {artifact.get('question_id')!r} has no attribution")
    partition = FeaturePartition(
        tuple((int(s), int(e)) for s, e in stored["audio_windows"]),
        tuple(int(p) for p in stored["text_feature_map"]),
    )
    meta = stored["estimator"]
    return AttributionMatrix(
        np.asarray(stored["values"], dtype=np.float64),
        partition,
        EstimatorMeta(
            method=meta["method"], m=meta["m"], seed=meta["seed"], antithetic=meta["antithetic"]
        ),
    )


def load_run_artifacts(run_dirs: Iterable[str | Path]) -> list[dict]:
    """Load per-question artifacts from one or more run directories.

    Sorted by (model, mode, question id) so downstream aggregation is
    deterministic regardless of filesystem order.
    """
    artifacts = []
    for run_dir in run_dirs:
        run_dir = Path(run_dir)
        if not run_dir.is_dir():
            raise FileNotFoundError(f"run directory {run_dir} does not exist")
        for path in sorted(run_dir.glob("question-*.json")):
            artifact = json.loads(path.read_text(encoding="utf-8"))
            if artifact.get("schema") != ARTIFACT_SCHEMA:
                raise ValueError(f"{path} is not a question artifact (schema {artifact.get('schema')!r})")
            artifacts.append(artifact)
    artifacts.sort(key=lambda a: (a["model_id"], a["mode"], a["question_id"]))
    return artifacts


@dataclass(frozen=True)
class CellStats:
    """One (model, prompt-mode) cell of the report."""

    model_id: str
    mode: str
    n_questions: int
    n_answered: int
    n_correct: int
    n_unparsed: int
    n_failed: int
    n_share_defined: int
    n_share_undefined: int
    accuracy: float | None
    a_shap_mean: float | None
    a_shap_half_width: float | None


@dataclass(frozen=True)
class RunReport:
    cells: tuple[CellStats, ...]
    interval_label: str = INTERVAL_LABEL
    notes: tuple[str, ...] = field(
        default=("Unparsed answers count as incorrect.", "Failed questions are excluded from all aggregates.")
    )


def aggregate_report(artifacts: Iterable[dict]) -> RunReport:
    """Accuracy and mean audio share with a 1.96*SE half-width per cell."""
    grouped: dict[tuple[str, str], list[dict]] = {}
    for artifact in artifacts:
        grouped.setdefault((artifact["model_id"], artifact["mode"]), []).append(artifact)

    cells = []
    for (model_id, mode), group in sorted(grouped.items()):
        answered = [a for a in group if a.get("error") is None]
        n_correct = sum(1 for a in answered if a["is_correct"])
        n_unparsed = sum(1 for a in answered if a["matched_letter"] is None)
        shares = [
            a["modality_score"]["a_shap"]
            for a in answered
            if a.get("modality_score") and a["modality_score"]["a_shap"] is not None
        ]
        n_undefined = sum(
            1
            for a in answered
            if a.get("modality_score") and a["modality_score"]["a_shap"] is None
        )
        accuracy = n_correct / len(answered) if answered else None
        mean = half = None
        if shares:
            values = np.asarray(shares, dtype=np.float64)
            mean = float(values.mean())
            if values.size > 1:
                stderr = float(values.std(ddof=1)) / float(np.sqrt(values.size))
                half = 1.96 * stderr
            else:
                half = 0.0
        cells.append(
            CellStats(
                model_id=model_id,
                mode=mode,
                n_questions=len(group),
                n_answered=len(answered),
                n_correct=n_correct,
                n_unparsed=n_unparsed,
                n_failed=len(group) - len(answered),
                n_share_defined=len(shares),
                n_share_undefined=n_undefined,
                accuracy=accuracy,
                a_shap_mean=mean,
                a_shap_half_width=half,
            )
        )
    return RunReport(cells=tuple(cells))


def render_report(report: RunReport, fmt: str = "md") -> str:
    if fmt == "md":
        return _render_md(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return _render_json(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _fmt_acc(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def _fmt_share(mean: float | None, half: float | None) -> str:
    if mean is None:
        return "-"
    return f"{mean:.2f} +/- {half:.2f}"


def _render_md(report: RunReport) -> str:
    models = sorted({c.model_id for c in report.cells})
    by_key = {(c.model_id, c.mode): c for c in report.cells}
    modes = ("mc-pi", "mc-npi")
    lines = [
        "| Model | Accuracy MC-PI | Accuracy MC-NPI | A-SHAP MC-PI | A-SHAP MC-NPI |",
        "| --- | --- | --- | --- | --- |",
    ]
    for model in models:
        row = [model]
        for mode in modes:
            cell = by_key.get((model, mode))
            row.append(_fmt_acc(cell.accuracy) if cell else "-")
        for mode in modes:
            cell = by_key.get((model, mode))
            row.append(_fmt_share(cell.a_shap_mean, cell.a_shap_half_width) if cell else "-")
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")
    lines.append(f"A-SHAP interval: {report.interval_label}. " + " ".join(report.notes))
    lines.append("")
    lines.append("| Model | Mode | Questions | Answered | Unparsed | Share undefined | Failed |")
    lines.append("| --- | --- | --- | --- | --- | --- | --- |")
    for cell in report.cells:
        lines.append(
            f"| {cell.model_id} | {cell.mode} | {cell.n_questions} | {cell.n_answered} "
            f"| {cell.n_unparsed} | {cell.n_share_undefined} | {cell.n_failed} |"
        )
    return "\n".join(lines) + "\n"


def _render_csv(report: RunReport) -> str:
    header = (
        "model_id,mode,accuracy,a_shap_mean,a_shap_half_width,"
        "n_questions,n_answered,n_correct,n_unparsed,n_share_undefined,n_failed"
    )
    rows = [header]
    for c in report.cells:
        rows.append(
            ",".join(
                [
                    c.model_id,
                    c.mode,
                    "" if c.accuracy is None else repr(c.accuracy),
                    "" if c.a_shap_mean is None else repr(c.a_shap_mean),
                    "" if c.a_shap_half_width is None else repr(c.a_shap_half_width),
                    str(c.n_questions),
                    str(c.n_answered),
                    str(c.n_correct),
                    str(c.n_unparsed),
                    str(c.n_share_undefined),
                    str(c.n_failed),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def _render_json(report: RunReport) -> str:
    payload = {
        "interval_label": report.interval_label,
        "notes": list(report.notes),
        "cells": [
            {
                "model_id": c.model_id,
                "mode": c.mode,
                "accuracy": c.accuracy,
                "a_shap_mean": c.a_shap_mean,
                "a_shap_half_width": c.a_shap_half_width,
                "n_questions": c.n_questions,
                "n_answered": c.n_answered,
                "n_correct": c.n_correct,
                "n_unparsed": c.n_unparsed,
                "n_share_defined": c.n_share_defined,
                "n_share_undefined": c.n_share_undefined,
                "n_failed": c.n_failed,
            }
            for c in report.cells
        ],
    }
    return json.dumps(payload, indent=2) + "\n"
