"""Protocol conformance checks runnable against any live /v1 endpoint.

The suite exercises the full client surface on a fixed deterministic input:
describe/tokenize/generate/score round trips, greedy determinism, agreement
between generate-time and teacher-forced logits, rejection of malformed
score requests, and batched-versus-unbatched score equality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import requests

from .endpoints import mask_policy_from
from .masking import apply_coalition, build_partition
from .types import AudioClip
from .wire import WireEndpoint, encode_audio, wire_client_connect

CONFORMANCE_PROMPT = (
    "You're a reliable assistant, follow these instructions.\n"
    "<audio>\n"
    "<|question|> Question: Which sound interrupts the melody near the end ?\n"
    "(A) Doorbell\n(B) Horn\n(C) Whistle\n(D) Applause <|answer|>"
)


@dataclass(frozen=True)
class ConformanceCheck:
    name: str
    passed: bool
    detail: str = ""


def _fixture_clip(sample_rate_hz: int, seconds: float = 0.2) -> AudioClip:
    # Strictly positive samples so no window is accidentally all-zero.
    n = max(8, int(round(sample_rate_hz * seconds)))
    t = np.arange(n) / sample_rate_hz
    samples = 0.5 + 0.2 * np.cos(2.0 * np.pi * 3.0 * t)
    return AudioClip(samples=samples, sample_rate_hz=sample_rate_hz)


def run_conformance_suite(base_url: str, *, timeout: float = 10.0) -> list[ConformanceCheck]:
    checks: list[ConformanceCheck] = []

    def record(name: str, fn) -> bool:
        try:
            detail = fn()
            checks.append(ConformanceCheck(name, True, detail or ""))
            return True
        except Exception as exc:
            checks.append(ConformanceCheck(name, False, f"{type(exc).__name__}: {exc}"))
            return False

    client_box: dict[str, WireEndpoint] = {}

    def check_describe() -> str:
        client = wire_client_connect(base_url, timeout=timeout, retries=1)
        info = client.describe()
        assert info.sample_rate_hz > 0, "sample_rate_hz must be positive"
        assert info.max_batch >= 1, "max_batch must be >= 1"
        assert info.logit_tolerance >= 0, "logit_tolerance must be >= 0"
        client_box["client"] = client
        return f"model_id={info.model_id}"

    if not record("describe_round_trip", check_describe):
        checks.append(ConformanceCheck("suite_aborted", False, "describe failed; skipping the rest"))
        return checks

    client = client_box["client"]
    info = client.describe()
    tolerance = info.logit_tolerance + 1e-9
    state: dict[str, object] = {}

    def check_tokenize() -> str:
        prompt = client.tokenize(CONFORMANCE_PROMPT)
        assert len(prompt) > 0, "tokenize returned no tokens"
        q0, q1 = prompt.question_span
        assert q1 > q0, "question span is empty"
        state["prompt"] = prompt
        return f"{len(prompt)} tokens, question span {prompt.question_span}"

    record("tokenize_round_trip", check_tokenize)

    def check_generate() -> str:
        prompt = state["prompt"]
        clip = _fixture_clip(info.sample_rate_hz)
        first = client.generate(clip, prompt)
        second = client.generate(clip, prompt)
        assert first.answer_token_ids == second.answer_token_ids, "greedy answers differ between runs"
        assert first.answer_positions == second.answer_positions, "answer positions differ between runs"
        assert np.max(np.abs(first.baseline_logits - second.baseline_logits)) <= tolerance, (
            "generate logits differ beyond the declared tolerance"
        )
        state["clip"] = clip
        state["trace"] = first
        return f"answer {first.answer_text!r} ({len(first)} tokens)"

    if "prompt" in state:
        record("generate_greedy_deterministic", check_generate)

    def check_score_full() -> str:
        prompt, clip, trace = state["prompt"], state["clip"], state["trace"]
        logits = client.score(clip.samples, prompt.token_ids, trace.answer_token_ids, trace.answer_positions)
        worst = float(np.max(np.abs(logits - trace.baseline_logits)))
        assert worst <= tolerance, f"full-input score deviates from generate by {worst}"
        return f"max deviation {worst:.3g}"

    if "trace" in state:
        record("score_full_matches_generate", check_score_full)

    def check_score_arity_rejected() -> str:
        prompt, clip, trace = state["prompt"], state["clip"], state["trace"]
        payload = {
            "variants": [{"audio_f32_b64": encode_audio(clip.samples), "token_ids": prompt.token_ids}],
            "answer_token_ids": list(trace.answer_token_ids),
            "answer_positions": list(trace.answer_positions)[:-1] or [0, 1],
        }
        response = requests.post(base_url.rstrip("/") + "/v1/score", json=payload, timeout=timeout)
        assert 400 <= response.status_code < 500, (
            f"mismatched ids/positions accepted with HTTP {response.status_code}"
        )
        body = response.json()
        assert "error" in body and "code" in body["error"] and "message" in body["error"], (
            "error body missing error.code/error.message"
        )
        return f"HTTP {response.status_code} [{body['error']['code']}]"

    if "trace" in state:
        record("score_rejects_arity_mismatch", check_score_arity_rejected)

    def check_batched_equals_unbatched() -> str:
        prompt, clip, trace = state["prompt"], state["clip"], state["trace"]
        policy = mask_policy_from(info)
        partition = build_partition(clip, prompt, policy)
        full = partition.all_features()
        coalitions = [full, frozenset(), full - {0}, full - {partition.n_features - 1}]
        coalitions = coalitions[: max(2, min(len(coalitions), info.max_batch))]
        variants = [apply_coalition(clip, prompt, partition, c, policy) for c in coalitions]
        batched = client.score_batch(variants, trace.answer_token_ids, trace.answer_positions)
        single = np.stack(
            [
                client.score(samples, ids, trace.answer_token_ids, trace.answer_positions)
                for samples, ids in variants
            ]
        )
        worst = float(np.max(np.abs(batched - single)))
        assert worst <= tolerance, f"batched and unbatched scores differ by {worst}"
        return f"{len(variants)} variants, max deviation {worst:.3g}"

    if "trace" in state:
        record("batched_equals_unbatched", check_batched_equals_unbatched)

    return checks


def assert_conformant(base_url: str, *, timeout: float = 10.0) -> list[ConformanceCheck]:
    """Run the suite and raise AssertionError listing any failures."""
    checks = run_conformance_suite(base_url, timeout=timeout)
    failures = [c for c in checks if not c.passed]
    if failures:
        lines = "\n".join(f"  {c.name}: {c.detail}" for c in failures)
        raise AssertionError(f"protocol conformance failures against {base_url}:\n{lines}")
    return checks
