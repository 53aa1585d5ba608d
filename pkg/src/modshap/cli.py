"""Command-line interface.

Exit codes: 0 success, 1 check failure, 2 schema/config error, 3 endpoint
unreachable, 4 partial run (some questions failed).
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

import click

from .conformance import run_conformance_suite
from .corpus import MC_NPI, MC_PI, PromptTemplate, load_corpus
from .endpoints import ModelEndpoint, SyntheticEndpoint, SyntheticModelSpec
from .errors import ConnectFailedError, CorpusSchemaError, MissingExampleError, ModshapError
from .runner import (
    RunConfig,
    aggregate_report,
    load_run_artifacts,
    render_report,
    run_corpus,
)
from .stub_server import StubServer
from .wire import wire_client_connect

EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_UNREACHABLE = 3
EXIT_PARTIAL = 4

SYNTHETIC_PREFIX = "synthetic:"


def resolve_endpoint(spec: str, *, timeout: float = 30.0) -> ModelEndpoint:
    """Endpoint specifier: an http(s) URL or ``synthetic:<kind>``."""
    if spec.startswith(SYNTHETIC_PREFIX):
        kind = spec[len(SYNTHETIC_PREFIX):]
        return SyntheticEndpoint(SyntheticModelSpec(kind=kind))  # type: ignore[arg-type]
    if spec.startswith("http://") or spec.startswith("https://"):
        return wire_client_connect(spec, timeout=timeout)
    raise ValueError(
        f"endpoint {spec!r} must be an http(s) URL or one of synthetic:additive, "
        "synthetic:dummy_audio, synthetic:dummy_text, synthetic:interaction, synthetic:constant"
    )


@click.group()
def main() -> None:
    """Shapley-value modality attribution for audio-text language models."""


@main.command()
@click.option("--dataset", required=True, type=click.Path(path_type=Path), help="Corpus JSON file.")
@click.option("--audio-root", type=click.Path(path_type=Path), default=None, help="Base directory for audio paths (default: dataset directory).")
@click.option("--endpoint", "endpoint_spec", required=True, help="Model endpoint URL or synthetic:<kind>.")
@click.option("--mode", type=click.Choice([MC_PI, MC_NPI]), default=MC_NPI, show_default=True)
@click.option("--estimator", type=click.Choice(["auto", "exact", "permutation"]), default="auto", show_default=True)
@click.option("--m", default=10, show_default=True, help="Permutation count.")
@click.option("--seed", default=0, show_default=True)
@click.option("--no-antithetic", is_flag=True, help="Disable forward+reversed permutation traversal.")
@click.option("--filter-source", default=None, help="Keep only questions whose source equals this value.")
@click.option("--grep", default=None, help="Keep only questions whose text matches this regex.")
@click.option("--max-audio-seconds", type=float, default=None, help="Truncate audio to this many seconds.")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path), help="Run directory for per-question artifacts.")
@click.option("--concurrency", default=1, show_default=True)
@click.option("--collapse-tokens", is_flag=True, help="Sum answer-token logits into a single game value.")
@click.option("--limit", type=int, default=None, help="Run at most this many questions.")
def run(
    dataset: Path,
    audio_root: Path | None,
    endpoint_spec: str,
    mode: str,
    estimator: str,
    m: int,
    seed: int,
    no_antithetic: bool,
    filter_source: str | None,
    grep: str | None,
    max_audio_seconds: float | None,
    out_dir: Path,
    concurrency: int,
    collapse_tokens: bool,
    limit: int | None,
) -> None:
    """Attribute every corpus question against an endpoint."""
    try:
        endpoint = resolve_endpoint(endpoint_spec)
    except ConnectFailedError as exc:
        click.echo(f"error: endpoint unreachable: {exc}", err=True)
        sys.exit(EXIT_UNREACHABLE)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    try:
        questions, warnings = load_corpus(dataset, audio_root, source_filter=filter_source)
    except CorpusSchemaError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for warning in warnings:
        click.echo(f"warning: {warning}", err=True)
    if grep:
        pattern = re.compile(grep)
        questions = [q for q in questions if pattern.search(q.question_text)]
    if limit is not None:
        questions = questions[:limit]
    if not questions:
        click.echo("error: no questions left after filtering", err=True)
        sys.exit(EXIT_CONFIG)

    config = RunConfig(
        mode=mode,
        estimator=estimator,  # type: ignore[arg-type]
        m=m,
        seed=seed,
        antithetic=not no_antithetic,
        max_audio_seconds=max_audio_seconds,
        collapse_tokens=collapse_tokens,
        concurrency=concurrency,
    )
    template = PromptTemplate()

    def progress(result) -> None:
        if result.failed:
            click.echo(f"[fail] {result.question.question_id}: {result.error}")
            return
        share = result.modality_score.a_shap
        share_text = "undefined" if share is None else f"{share:.3f}"
        verdict = "correct" if result.is_correct else "incorrect"
        click.echo(
            f"[done] {result.question.question_id}: {verdict} "
            f"({result.matched_letter or 'unparsed'}), a-shap {share_text}, "
            f"{result.evaluation_count} evals in {result.wall_time_s:.2f}s"
        )

    try:
        results = run_corpus(questions, endpoint, template, config, out_dir, progress=progress)
    except MissingExampleError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)

    n_failed = sum(1 for r in results if r.failed)
    click.echo(f"run complete: {len(results)} questions, {n_failed} failed, artifacts in {out_dir}")
    if n_failed == len(results):
        first = next(r for r in results if r.failed)
        if "ConnectFailedError" in (first.error or ""):
            sys.exit(EXIT_UNREACHABLE)
    if n_failed:
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--run-dir", "run_dirs", required=True, multiple=True, type=click.Path(path_type=Path), help="Run directory (repeatable).")
@click.option("--format", "fmt", type=click.Choice(["md", "csv", "json"]), default="md", show_default=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None, help="Write the report here instead of stdout.")
def report(run_dirs: tuple[Path, ...], fmt: str, out_file: Path | None) -> None:
    """Aggregate persisted runs into the accuracy / A-SHAP table."""
    try:
        artifacts = load_run_artifacts(run_dirs)
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not artifacts:
        click.echo("error: no question artifacts found", err=True)
        sys.exit(EXIT_CONFIG)
    rendered = render_report(aggregate_report(artifacts), fmt)
    if out_file is None:
        click.echo(rendered, nl=False)
    else:
        out_file.parent.mkdir(parents=True, exist_ok=True)
        out_file.write_text(rendered, encoding="utf-8")
        click.echo(f"report written to {out_file}")


@main.command()
@click.option("--run-dir", required=True, type=click.Path(path_type=Path))
@click.option("--question-id", required=True)
@click.option("--token", default="auto", show_default=True, help="Answer token index, or auto for the dominant token.")
@click.option("--token-view", type=click.Choice(["selected", "summed"]), default="selected", show_default=True)
@click.option("--out", "out_file", required=True, type=click.Path(path_type=Path))
def plot(run_dir: Path, question_id: str, token: str, token_view: str, out_file: Path) -> None:
    """Render token highlights and waveform strips for one question."""
    from .errors import MissingAttributionError
    from .plotting import emit_plot
    from .runner import load_run_artifacts

    try:
        artifacts = load_run_artifacts([run_dir])
    except (FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    matches = [a for a in artifacts if a["question_id"] == question_id]
    if not matches:
        click.echo(f"error: question {question_id!r} not found in {run_dir}", err=True)
        sys.exit(EXIT_CONFIG)
    token_arg: int | str = token if token == "auto" else int(token)
    try:
        payload = emit_plot(matches[0], out_file, token=token_arg, token_view=token_view)
    except (MissingAttributionError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    highlighted = [t["text"] for t in payload["tokens"] if t["highlight"]]
    click.echo(f"plot written to {out_file} (sidecar {out_file}.json)")
    click.echo(f"highlighted tokens: {highlighted}")


@main.command()
@click.option("--seed", default=0, show_default=True)
def selftest(seed: int) -> None:
    """Run the synthetic-oracle suite: fast engine and pipeline sanity checks."""
    from .selftest import run_selftest

    ok = run_selftest(seed=seed, echo=click.echo)
    if not ok:
        sys.exit(EXIT_CHECK_FAILED)


@main.command("serve-stub")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8977, show_default=True, help="0 picks a free port.")
@click.option(
    "--kind",
    type=click.Choice(["additive", "dummy_audio", "dummy_text", "interaction", "constant"]),
    default="additive",
    show_default=True,
)
def serve_stub(host: str, port: int, kind: str) -> None:
    """Serve the protocol conformance stub until interrupted."""
    endpoint = SyntheticEndpoint(SyntheticModelSpec(kind=kind))  # type: ignore[arg-type]
    server = StubServer(endpoint, host=host, port=port)
    click.echo(f"stub server ({kind}) listening on {server.base_url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass


@main.command()
@click.option("--endpoint", "base_url", required=True, help="Base URL of a /v1 server.")
@click.option("--timeout", default=10.0, show_default=True)
def conformance(base_url: str, timeout: float) -> None:
    """Run the protocol conformance suite against a live endpoint."""
    try:
        checks = run_conformance_suite(base_url, timeout=timeout)
    except ModshapError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_UNREACHABLE)
    failed = 0
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        detail = f" ({check.detail})" if check.detail else ""
        click.echo(f"[{status}] {check.name}{detail}")
        failed += 0 if check.passed else 1
    if failed:
        click.echo(f"{failed} conformance check(s) failed", err=True)
        sys.exit(EXIT_CHECK_FAILED)
    click.echo("all conformance checks passed")


if __name__ == "__main__":
    main()
