"""Value functions: what a coalition is worth to the model.

Generation scoring teacher-forces the saved baseline answer under each masked
input and reads the logit of every answer token at its position; keeping the
answer token set fixed is what makes logit changes comparable across
coalitions. Raw logits are returned rather than deltas against the baseline:
Shapley values are invariant to additive constants, so the attribution is
unchanged and one subtraction per call is saved.

Coalition results are cached inside the value function, and batch evaluation
deduplicates before touching the endpoint, so repeated coalitions cost one
model call regardless of how many times an estimator asks.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .endpoints import ModelEndpoint
from .errors import EmptyGenerationError, ProtocolViolationError
from .masking import MaskPolicy, apply_coalition
from .shapley import ValueFunction
from .types import AnswerTrace, AudioClip, Coalition, FeaturePartition, TokenizedPrompt


@dataclass(frozen=True)
class GenerationScoringContext:
    """Everything needed to score coalitions against one baseline answer.

    The trace must come from exactly this (clip, prompt) pair with no masking.
    """

    trace: AnswerTrace
    clip: AudioClip
    prompt: TokenizedPrompt
    partition: FeaturePartition
    policy: MaskPolicy


def baseline_answer(model: ModelEndpoint, clip: AudioClip, prompt: TokenizedPrompt) -> AnswerTrace:
    """Greedy unmasked generation; the returned tokens define the answer set."""
    trace = model.generate(clip, prompt)
    if len(trace) == 0:
        raise EmptyGenerationError("model produced an empty answer")
    return trace


class _CoalitionCache:
    """Thread-safe coalition -> value-vector cache."""

    def __init__(self) -> None:
        self._values: dict[Coalition, np.ndarray] = {}
        self._lock = threading.Lock()

    def get(self, coalition: Coalition) -> np.ndarray | None:
        with self._lock:
            return self._values.get(coalition)

    def put(self, coalition: Coalition, value: np.ndarray) -> None:
        with self._lock:
            self._values.setdefault(coalition, value)


def generation_value_fn(
    ctx: GenerationScoringContext,
    model: ModelEndpoint,
    *,
    collapse_tokens: bool = False,
) -> ValueFunction:
    """Per-answer-token value function for generation scoring.

    ``collapse_tokens`` folds the per-token logits into their sum, yielding a
    single-token game; the default keeps tokens separate so modality
    aggregation can take absolute values per token.
    """
    trace = ctx.trace
    answer_len = len(trace)
    max_batch = max(1, model.describe().max_batch)
    cache = _CoalitionCache()

    def raw_logits_for(coalition: Coalition) -> np.ndarray:
        cached = cache.get(coalition)
        if cached is not None:
            return cached
        samples, token_ids = apply_coalition(ctx.clip, ctx.prompt, ctx.partition, coalition, ctx.policy)
        logits = np.asarray(
            model.score(samples, token_ids, trace.answer_token_ids, trace.answer_positions),
            dtype=np.float64,
        ).reshape(-1)
        _check_arity(logits.size, answer_len)
        cache.put(coalition, logits)
        return logits

    def raw_logits_batch(coalitions: list[Coalition]) -> list[np.ndarray]:
        missing = [c for c in dict.fromkeys(coalitions) if cache.get(c) is None]
        for start in range(0, len(missing), max_batch):
            chunk = missing[start : start + max_batch]
            variants = [
                apply_coalition(ctx.clip, ctx.prompt, ctx.partition, c, ctx.policy) for c in chunk
            ]
            logits = np.asarray(
                model.score_batch(variants, trace.answer_token_ids, trace.answer_positions),
                dtype=np.float64,
            )
            if logits.shape != (len(chunk), answer_len):
                raise ProtocolViolationError(
                    f"batched score returned shape {logits.shape}, expected {(len(chunk), answer_len)}"
                )
            for coalition, row in zip(chunk, logits):
                cache.put(coalition, row)
        return [cache.get(c) for c in coalitions]

    if collapse_tokens:
        return ValueFunction(
            evaluate=lambda s: np.array([raw_logits_for(s).sum()]),
            token_count=1,
            evaluate_batch=lambda cs: np.array([[row.sum()] for row in raw_logits_batch(cs)]),
        )
    return ValueFunction(
        evaluate=raw_logits_for,
        token_count=answer_len,
        evaluate_batch=lambda cs: np.stack(raw_logits_batch(cs)),
    )


def classification_value_fn(
    model: ModelEndpoint,
    clip: AudioClip,
    prompt: TokenizedPrompt,
    partition: FeaturePartition,
    policy: MaskPolicy,
    class_id: int,
) -> ValueFunction:
    """Single-token value function returning one class probability per coalition."""
    if not hasattr(model, "class_probabilities"):
        raise ValueError(f"endpoint {model!r} does not expose class probabilities")
    cache = _CoalitionCache()

    def evaluate(coalition: Coalition) -> np.ndarray:
        cached = cache.get(coalition)
        if cached is not None:
            return cached
        samples, token_ids = apply_coalition(clip, prompt, partition, coalition, policy)
        probs = np.asarray(model.class_probabilities(samples, token_ids), dtype=np.float64)
        if not 0 <= class_id < probs.size:
            raise ValueError(f"class id {class_id} outside [0, {probs.size})")
        value = np.array([probs[class_id]])
        cache.put(coalition, value)
        return value

    return ValueFunction(evaluate=evaluate, token_count=1)


def _check_arity(got: int, expected: int) -> None:
    if got != expected:
        raise ProtocolViolationError(f"score returned {got} logits for a {expected}-token answer")
