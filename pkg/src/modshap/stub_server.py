"""Protocol conformance stub: a /v1 server backed by an in-process endpoint.

Runs on the stdlib HTTP server so tests can embed it in a thread without
extra infrastructure. The ``corrupt_score_arity`` switch makes the stub
misbehave on purpose (one logit dropped per score row) so client-side arity
detection can be exercised.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .endpoints import ModelEndpoint, SyntheticEndpoint, SyntheticModelSpec
from .errors import EmptyGenerationError, ModshapError
from .types import AudioClip, Token, TokenizedPrompt
from .wire import decode_audio

_JSON = "application/json"


class _BadRequest(Exception):
    def __init__(self, message: str, code: str = "bad_request") -> None:
        super().__init__(message)
        self.code = code


def _require(body: dict, key: str, kind: type):
    if not isinstance(body, dict) or key not in body:
        raise _BadRequest(f"missing field {key!r}")
    value = body[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise _BadRequest(f"field {key!r} must be {kind.__name__}")
    return value


def _int_list(body: dict, key: str) -> list[int]:
    values = _require(body, key, list)
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
        raise _BadRequest(f"field {key!r} must be a list of integers")
    return values


class StubServer:
    """Wraps an endpoint behind the /v1 wire protocol."""

    def __init__(
        self,
        endpoint: ModelEndpoint | None = None,
        host: str = "127.0.0.1",
        port: int = 0,
        *,
        corrupt_score_arity: bool = False,
        quiet: bool = True,
    ) -> None:
        self.endpoint = endpoint if endpoint is not None else SyntheticEndpoint(
            SyntheticModelSpec(kind="additive")
        )
        self.corrupt_score_arity = corrupt_score_arity
        handler = _make_handler(self, quiet=quiet)
        self._server = ThreadingHTTPServer((host, port), handler)
        self._thread: threading.Thread | None = None

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> "StubServer":
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "StubServer":
        return self.start_background()

    def __exit__(self, *exc) -> None:
        self.shutdown()


def _make_handler(stub: StubServer, *, quiet: bool):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # noqa: D102
            if not quiet:
                super().log_message(fmt, *args)

        def _reply(self, status: int, payload: dict) -> None:
            body = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", _JSON)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _error(self, status: int, code: str, message: str) -> None:
            self._reply(status, {"error": {"code": code, "message": message}})

        def _read_body(self) -> dict:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            try:
                body = json.loads(raw.decode("utf-8")) if raw else {}
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise _BadRequest(f"request body is not valid JSON: {exc}")
            if not isinstance(body, dict):
                raise _BadRequest("request body must be a JSON object")
            return body

        def do_GET(self) -> None:  # noqa: N802
            if self.path != "/v1/describe":
                self._error(404, "not_found", f"unknown route {self.path}")
                return
            info = stub.endpoint.describe()
            self._reply(
                200,
                {
                    "model_id": info.model_id,
                    "sample_rate_hz": info.sample_rate_hz,
                    "max_audio_seconds": info.max_audio_seconds,
                    "mask_token_id": info.mask_token_id,
                    "protected_tokens": list(info.protected_tokens),
                    "max_batch": info.max_batch,
                    "logit_tolerance": info.logit_tolerance,
                },
            )

        def do_POST(self) -> None:  # noqa: N802
            routes = {
                "/v1/tokenize": self._tokenize,
                "/v1/generate": self._generate,
                "/v1/score": self._score,
            }
            route = routes.get(self.path)
            if route is None:
                self._error(404, "not_found", f"unknown route {self.path}")
                return
            try:
                route(self._read_body())
            except _BadRequest as exc:
                self._error(400, exc.code, str(exc))
            except EmptyGenerationError as exc:
                self._error(400, "empty_generation", str(exc))
            except ModshapError as exc:
                self._error(400, "bad_request", str(exc))
            except Exception as exc:  # pragma: no cover - defensive
                self._error(500, "internal", f"{type(exc).__name__}: {exc}")

        def _tokenize(self, body: dict) -> None:
            text = _require(body, "text", str)
            prompt = stub.endpoint.tokenize(text)
            self._reply(
                200,
                {
                    "tokens": [{"id": t.token_id, "text": t.text} for t in prompt.tokens],
                    "question_span": list(prompt.question_span),
                    "instruction_span": list(prompt.instruction_span),
                },
            )

        def _generate(self, body: dict) -> None:
            samples = self._decode_audio(body)
            token_ids = _int_list(body, "token_ids")
            if body.get("greedy") is not True:
                raise _BadRequest("only greedy generation is supported", code="unsupported")
            info = stub.endpoint.describe()
            clip = AudioClip(samples=samples, sample_rate_hz=info.sample_rate_hz)
            prompt = self._prompt_from_ids(token_ids)
            trace = stub.endpoint.generate(clip, prompt)
            self._reply(
                200,
                {
                    "answer_token_ids": list(trace.answer_token_ids),
                    "answer_positions": list(trace.answer_positions),
                    "answer_logits": [float(x) for x in trace.baseline_logits],
                    "answer_text": trace.answer_text,
                },
            )

        def _score(self, body: dict) -> None:
            variants = _require(body, "variants", list)
            if not variants:
                raise _BadRequest("variants must be non-empty")
            answer_ids = _int_list(body, "answer_token_ids")
            answer_positions = _int_list(body, "answer_positions")
            if len(answer_ids) != len(answer_positions):
                raise _BadRequest(
                    f"answer_token_ids ({len(answer_ids)}) and answer_positions "
                    f"({len(answer_positions)}) must have equal length"
                )
            if not answer_ids:
                raise _BadRequest("answer_token_ids must be non-empty")
            max_batch = stub.endpoint.describe().max_batch
            if len(variants) > max_batch:
                raise _BadRequest(f"batch of {len(variants)} exceeds max_batch {max_batch}")
            pairs = []
            for variant in variants:
                if not isinstance(variant, dict):
                    raise _BadRequest("each variant must be an object")
                pairs.append((self._decode_audio(variant), _int_list(variant, "token_ids")))
            logits = stub.endpoint.score_batch(pairs, answer_ids, answer_positions)
            rows = [[float(x) for x in row] for row in np.asarray(logits)]
            if stub.corrupt_score_arity:
                rows = [row[:-1] for row in rows]
            self._reply(200, {"logits": rows})

        def _decode_audio(self, body: dict) -> np.ndarray:
            payload = _require(body, "audio_f32_b64", str)
            try:
                return decode_audio(payload)
            except Exception as exc:
                raise _BadRequest(f"audio_f32_b64 is not valid float32 PCM: {exc}")

        def _prompt_from_ids(self, token_ids: list[int]) -> TokenizedPrompt:
            # Wire prompts arrive as bare ids; surfaces are unknown to the
            # server, so spans are reconstructed by the backing endpoint at
            # score time and a permissive all-question span is used here.
            tokens = tuple(Token(token_id=i, text="") for i in token_ids)
            return TokenizedPrompt(tokens, question_span=(0, len(tokens)), instruction_span=(0, 0))

    return Handler
