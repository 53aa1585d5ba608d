"""Wire client against the stub server: round trips, error mapping, retries."""

import numpy as np
import pytest
import requests

from helpers import STRUCTURED_PROMPT, nonzero_clip
from modshap import (
    ConnectFailedError,
    ProtocolViolationError,
    StubServer,
    SyntheticEndpoint,
    SyntheticModelSpec,
    apply_coalition,
    build_partition,
    mask_policy_from,
    wire_client_connect,
)
from modshap.wire import decode_audio, encode_audio


@pytest.fixture(scope="module")
def stub():
    with StubServer(SyntheticEndpoint(SyntheticModelSpec(kind="additive"))) as server:
        yield server


@pytest.fixture(scope="module")
def client(stub):
    return wire_client_connect(stub.base_url, timeout=5.0, retries=1)


class TestAudioEncoding:
    def test_round_trip_is_float32_exact(self):
        samples = np.array([0.125, -0.5, 0.0625, 1.0, -1.0])
        np.testing.assert_array_equal(decode_audio(encode_audio(samples)), samples)

    def test_misaligned_payload_rejected(self):
        with pytest.raises(ValueError):
            decode_audio("QUJD")  # 3 bytes


class TestRoundTrips:
    def test_describe(self, client):
        info = client.describe()
        assert info.model_id == "synthetic-additive"
        assert info.sample_rate_hz == 16000
        assert info.mask_token_id == 3
        assert "<|question|>" in info.protected_tokens

    def test_tokenize_spans_survive_the_wire(self, stub, client):
        local = stub.endpoint.tokenize(STRUCTURED_PROMPT)
        remote = client.tokenize(STRUCTURED_PROMPT)
        assert remote.token_ids == local.token_ids
        assert remote.question_span == local.question_span
        assert remote.instruction_span == local.instruction_span

    def test_generate_and_score_full_agree(self, client):
        clip = nonzero_clip(600)
        prompt = client.tokenize(STRUCTURED_PROMPT)
        trace = client.generate(clip, prompt)
        assert trace.answer_text == "(B) Doorbell"
        logits = client.score(
            clip.samples, prompt.token_ids, trace.answer_token_ids, trace.answer_positions
        )
        # float32 transport quantizes the audio identically both times.
        np.testing.assert_array_equal(logits, trace.baseline_logits)

    def test_wrong_rate_clip_rejected_client_side(self, client):
        clip = nonzero_clip(100, rate=8000)
        prompt = client.tokenize(STRUCTURED_PROMPT)
        with pytest.raises(ValueError):
            client.generate(clip, prompt)

    def test_batched_equals_unbatched(self, client):
        clip = nonzero_clip(600)
        prompt = client.tokenize(STRUCTURED_PROMPT)
        trace = client.generate(clip, prompt)
        policy = mask_policy_from(client.describe())
        partition = build_partition(clip, prompt, policy)
        coalitions = [
            partition.all_features(),
            frozenset(),
            partition.all_features() - {0, 1},
            frozenset({2, partition.n_audio}),
        ]
        variants = [apply_coalition(clip, prompt, partition, c, policy) for c in coalitions]
        batched = client.score_batch(variants, trace.answer_token_ids, trace.answer_positions)
        singles = np.stack(
            [client.score(s, ids, trace.answer_token_ids, trace.answer_positions) for s, ids in variants]
        )
        np.testing.assert_array_equal(batched, singles)

    def test_batch_larger_than_max_batch_rejected_client_side(self, client):
        info = client.describe()
        samples = np.ones(8)
        variants = [(samples, [1, 2, 3])] * (info.max_batch + 1)
        with pytest.raises(ValueError):
            client.score_batch(variants, [9], [3])


class TestServerValidation:
    def test_score_arity_mismatch_is_400(self, stub):
        payload = {
            "variants": [{"audio_f32_b64": encode_audio(np.ones(4)), "token_ids": [1, 2]}],
            "answer_token_ids": [5, 6, 7],
            "answer_positions": [2, 3],
        }
        response = requests.post(stub.base_url + "/v1/score", json=payload, timeout=5)
        assert response.status_code == 400
        body = response.json()
        assert body["error"]["code"] == "bad_request"

    def test_unknown_route_is_404_with_error_body(self, stub):
        response = requests.post(stub.base_url + "/v1/nope", json={}, timeout=5)
        assert response.status_code == 404
        assert "error" in response.json()

    def test_malformed_json_is_400(self, stub):
        response = requests.post(
            stub.base_url + "/v1/tokenize",
            data=b"{not json",
            headers={"Content-Type": "application/json"},
            timeout=5,
        )
        assert response.status_code == 400

    def test_non_greedy_generation_rejected(self, stub):
        payload = {"audio_f32_b64": encode_audio(np.ones(4)), "token_ids": [1], "greedy": False}
        response = requests.post(stub.base_url + "/v1/generate", json=payload, timeout=5)
        assert response.status_code == 400
        assert response.json()["error"]["code"] == "unsupported"


class TestClientErrorMapping:
    def test_wrong_logit_arity_raises_protocol_violation(self):
        with StubServer(
            SyntheticEndpoint(SyntheticModelSpec(kind="additive")), corrupt_score_arity=True
        ) as bad:
            client = wire_client_connect(bad.base_url, timeout=5.0, retries=0)
            clip = nonzero_clip(200)
            prompt = client.tokenize(STRUCTURED_PROMPT)
            trace = client.generate(clip, prompt)
            with pytest.raises(ProtocolViolationError):
                client.score(
                    clip.samples, prompt.token_ids, trace.answer_token_ids, trace.answer_positions
                )

    def test_unreachable_host_raises_connect_failed(self):
        with pytest.raises(ConnectFailedError):
            wire_client_connect("http://127.0.0.1:9", timeout=0.3, retries=1, backoff_s=0.01)

    def test_http_400_maps_to_protocol_violation(self, stub):
        client = wire_client_connect(stub.base_url, timeout=5.0, retries=0)
        with pytest.raises(ProtocolViolationError):
            client.tokenize(None)  # type: ignore[arg-type]
