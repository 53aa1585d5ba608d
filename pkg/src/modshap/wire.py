"""HTTP+JSON client for the masked-inference protocol.

Masking happens client-side and masked inputs travel over the wire, so the
server stays a dumb scorer with no knowledge of window geometry. Audio is
base64-encoded little-endian float32 mono PCM at the server's declared rate;
callers must resample before masking so window boundaries align with what the
model consumes.

describe/tokenize/score are retried with exponential backoff; generate is
never auto-retried.
"""

from __future__ import annotations

import base64
import threading
import time
from typing import Any, Sequence

import numpy as np
import requests

from .endpoints import EndpointInfo, ModelEndpoint
from .errors import (
    ConnectFailedError,
    EmptyGenerationError,
    EndpointTimeoutError,
    ModelUnavailableError,
    ProtocolViolationError,
)
from .types import AnswerTrace, AudioClip, Token, TokenizedPrompt


def encode_audio(samples: np.ndarray) -> str:
    """Little-endian float32 PCM, base64."""
    return base64.b64encode(np.asarray(samples, dtype="<f4").tobytes()).decode("ascii")


def decode_audio(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    if len(raw) % 4 != 0:
        raise ValueError(f"audio payload of {len(raw)} bytes is not float32-aligned")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


class WireEndpoint(ModelEndpoint):
    """Client for a /v1 masked-inference server."""

    def __init__(
        self,
        base_url: str,
        *,
        timeout: float = 30.0,
        retries: int = 3,
        backoff_s: float = 0.25,
        max_inflight: int = 4,
        bearer_token: str | None = None,
    ) -> None:
        self._base_url = base_url.rstrip("/")
        self._timeout = timeout
        self._retries = retries
        self._backoff_s = backoff_s
        self._session = requests.Session()
        if bearer_token:
            self._session.headers["Authorization"] = f"Bearer {bearer_token}"
        self._inflight = threading.Semaphore(max_inflight)
        self._info: EndpointInfo | None = None

    def describe(self) -> EndpointInfo:
        if self._info is None:
            body = self._request("GET", "/v1/describe", payload=None, idempotent=True)
            self._info = _parse_describe(body)
        return self._info

    def tokenize(self, text: str) -> TokenizedPrompt:
        body = self._request("POST", "/v1/tokenize", {"text": text}, idempotent=True)
        return _parse_tokenize(body)

    def generate(self, clip: AudioClip, prompt: TokenizedPrompt) -> AnswerTrace:
        info = self.describe()
        if clip.sample_rate_hz != info.sample_rate_hz:
            raise ValueError(
                f"clip is at {clip.sample_rate_hz} Hz but the endpoint expects "
                f"{info.sample_rate_hz} Hz; resample before masking"
            )
        payload = {
            "audio_f32_b64": encode_audio(clip.samples),
            "token_ids": prompt.token_ids,
            "greedy": True,
        }
        body = self._request("POST", "/v1/generate", payload, idempotent=False)
        return _parse_generate(body)

    def score(
        self,
        samples: np.ndarray,
        token_ids: Sequence[int],
        answer_token_ids: Sequence[int],
        answer_positions: Sequence[int],
    ) -> np.ndarray:
        return self.score_batch([(samples, token_ids)], answer_token_ids, answer_positions)[0]

    def score_batch(
        self,
        variants: Sequence[tuple[np.ndarray, Sequence[int]]],
        answer_token_ids: Sequence[int],
        answer_positions: Sequence[int],
    ) -> np.ndarray:
        if not variants:
            return np.zeros((0, len(answer_token_ids)))
        info = self.describe()
        if len(variants) > info.max_batch:
            raise ValueError(f"{len(variants)} variants exceed the endpoint's max_batch {info.max_batch}")
        payload = {
            "variants": [
                {"audio_f32_b64": encode_audio(samples), "token_ids": list(map(int, ids))}
                for samples, ids in variants
            ],
            "answer_token_ids": list(map(int, answer_token_ids)),
            "answer_positions": list(map(int, answer_positions)),
        }
        body = self._request("POST", "/v1/score", payload, idempotent=True)
        logits = _expect(body, "logits", list)
        if len(logits) != len(variants):
            raise ProtocolViolationError(
                f"score returned {len(logits)} rows for {len(variants)} variants"
            )
        rows = []
        for row in logits:
            if not isinstance(row, list) or len(row) != len(answer_token_ids):
                raise ProtocolViolationError(
                    f"score row arity {len(row) if isinstance(row, list) else '?'} does not match "
                    f"answer length {len(answer_token_ids)}"
                )
            rows.append([float(x) for x in row])
        values = np.asarray(rows, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ProtocolViolationError("score returned non-finite logits")
        return values

    def _request(self, method: str, path: str, payload: Any, *, idempotent: bool) -> dict:
        url = self._base_url + path
        attempts = (self._retries + 1) if idempotent else 1
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(self._backoff_s * (2 ** (attempt - 1)))
            try:
                with self._inflight:
                    response = self._session.request(method, url, json=payload, timeout=self._timeout)
            except requests.Timeout as exc:
                last_error = EndpointTimeoutError(f"{method} {url} timed out after {self._timeout}s")
                last_error.__cause__ = exc
                continue
            except requests.ConnectionError as exc:
                last_error = ConnectFailedError(f"cannot reach {url}: {exc}")
                last_error.__cause__ = exc
                continue
            return _handle_response(method, url, response)
        raise last_error  # type: ignore[misc]


def _handle_response(method: str, url: str, response: requests.Response) -> dict:
    if response.status_code >= 400:
        code, message = _parse_error_body(response)
        detail = f"{method} {url} -> HTTP {response.status_code} [{code}] {message}"
        if response.status_code >= 500:
            raise ModelUnavailableError(detail)
        raise ProtocolViolationError(detail)
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolViolationError(f"{method} {url} returned non-JSON body") from exc
    if not isinstance(body, dict):
        raise ProtocolViolationError(f"{method} {url} returned {type(body).__name__}, expected object")
    return body


def _parse_error_body(response: requests.Response) -> tuple[str, str]:
    try:
        body = response.json()
        error = body["error"]
        return str(error["code"]), str(error["message"])
    except Exception:
        return "unknown", response.text[:200]


def _expect(body: dict, key: str, kind: type | tuple[type, ...]) -> Any:
    if key not in body:
        raise ProtocolViolationError(f"response is missing required field {key!r}")
    value = body[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        expected = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ProtocolViolationError(
            f"field {key!r} has type {type(value).__name__}, expected {expected}"
        )
    return value


def _parse_describe(body: dict) -> EndpointInfo:
    max_audio = body.get("max_audio_seconds")
    if max_audio is not None and not isinstance(max_audio, (int, float)):
        raise ProtocolViolationError("max_audio_seconds must be a number or null")
    protected = _expect(body, "protected_tokens", list)
    if not all(isinstance(t, str) for t in protected):
        raise ProtocolViolationError("protected_tokens must be strings")
    return EndpointInfo(
        model_id=_expect(body, "model_id", str),
        sample_rate_hz=_expect(body, "sample_rate_hz", int),
        max_audio_seconds=float(max_audio) if max_audio is not None else None,
        mask_token_id=_expect(body, "mask_token_id", int),
        protected_tokens=tuple(protected),
        max_batch=_expect(body, "max_batch", int),
        logit_tolerance=float(_expect(body, "logit_tolerance", (int, float))),
    )


def _parse_tokenize(body: dict) -> TokenizedPrompt:
    raw_tokens = _expect(body, "tokens", list)
    tokens = []
    for entry in raw_tokens:
        if not isinstance(entry, dict) or "id" not in entry or "text" not in entry:
            raise ProtocolViolationError("each token must be an object with id and text")
        tokens.append(Token(token_id=int(entry["id"]), text=str(entry["text"])))
    spans = {}
    for key in ("question_span", "instruction_span"):
        span = _expect(body, key, list)
        if len(span) != 2:
            raise ProtocolViolationError(f"{key} must be a [start, end] pair")
        spans[key] = (int(span[0]), int(span[1]))
    try:
        return TokenizedPrompt(tuple(tokens), spans["question_span"], spans["instruction_span"])
    except ValueError as exc:
        raise ProtocolViolationError(f"tokenize response invalid: {exc}") from exc


def _parse_generate(body: dict) -> AnswerTrace:
    ids = _expect(body, "answer_token_ids", list)
    positions = _expect(body, "answer_positions", list)
    logits = _expect(body, "answer_logits", list)
    text = _expect(body, "answer_text", str)
    if len(ids) == 0:
        raise EmptyGenerationError("endpoint generated an empty answer")
    if not (len(ids) == len(positions) == len(logits)):
        raise ProtocolViolationError(
            f"generate arity mismatch: {len(ids)} ids, {len(positions)} positions, {len(logits)} logits"
        )
    try:
        return AnswerTrace(tuple(ids), tuple(positions), np.asarray(logits, dtype=np.float64), text)
    except ValueError as exc:
        raise ProtocolViolationError(f"generate response invalid: {exc}") from exc


def wire_client_connect(
    base_url: str,
    *,
    timeout: float = 30.0,
    retries: int = 3,
    backoff_s: float = 0.25,
    max_inflight: int = 4,
    bearer_token: str | None = None,
) -> WireEndpoint:
    """Connect to a /v1 server, eagerly fetching describe().

    Raises :class:`ConnectFailedError` when the host stays unreachable after
    the configured retries.
    """
    endpoint = WireEndpoint(
        base_url,
        timeout=timeout,
        retries=retries,
        backoff_s=backoff_s,
        max_inflight=max_inflight,
        bearer_token=bearer_token,
    )
    endpoint.describe()
    return endpoint
