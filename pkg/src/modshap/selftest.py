"""Synthetic-oracle suite behind the ``selftest`` CLI command.

Fast sanity checks against models with analytically known attributions; the
full property and acceptance suites live in the test tree.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .endpoints import SyntheticEndpoint, SyntheticModelSpec, mask_policy_from
from .masking import build_partition, plan_audio_windows
from .metrics import modality_contribution
from .scoring import GenerationScoringContext, baseline_answer, generation_value_fn
from .shapley import (
    EstimatorConfig,
    estimate_attributions,
    evaluation_budget,
    exact_shapley,
    permutation_shapley,
    scalar_game,
)
from .types import AttributionMatrix, AudioClip, EstimatorMeta, FeaturePartition

_PROMPT = (
    "You're a reliable assistant, follow these instructions.\n"
    "<audio>\n"
    "<|question|> Question: What sound is heard at the end ?\n"
    "(A) Bell\n(B) Horn <|answer|>"
)


def _fixture_clip(rate: int = 16000, seconds: float = 0.05) -> AudioClip:
    n = int(rate * seconds)
    samples = 0.4 + 0.2 * np.cos(np.arange(n) * 0.01)
    return AudioClip(samples=samples, sample_rate_hz=rate)


def _end_to_end_share(kind: str, estimator: str = "permutation") -> float | None:
    endpoint = SyntheticEndpoint(SyntheticModelSpec(kind=kind))  # type: ignore[arg-type]
    clip = _fixture_clip()
    prompt = endpoint.tokenize(_PROMPT)
    policy = mask_policy_from(endpoint.describe())
    trace = baseline_answer(endpoint, clip, prompt)
    partition = build_partition(clip, prompt, policy)
    ctx = GenerationScoringContext(trace, clip, prompt, partition, policy)
    value_fn = generation_value_fn(ctx, endpoint)
    config = EstimatorConfig(method=estimator, m=10, seed=7)  # type: ignore[arg-type]
    attribution = estimate_attributions(value_fn, partition.n_features, config, partition=partition)
    return modality_contribution(attribution).a_shap


def run_selftest(seed: int = 0, echo: Callable[[str], None] = print) -> bool:
    rng = np.random.default_rng(seed)
    results: list[tuple[str, bool, str]] = []

    def check(name: str, condition: bool, detail: str = "") -> None:
        results.append((name, bool(condition), detail))

    weights = np.array([2.0, -1.0, 3.0])
    additive = scalar_game(lambda s: float(sum(weights[j] for j in s)))
    phi = exact_shapley(additive, 3).values[:, 0]
    check("exact_additive_recovers_weights", bool(np.allclose(phi, weights, atol=1e-12)))

    and_game = scalar_game(lambda s: 1.0 if {0, 1} <= s else 0.0)
    phi = exact_shapley(and_game, 2).values[:, 0]
    check("exact_and_game_splits_evenly", bool(np.allclose(phi, [0.5, 0.5], atol=1e-12)))

    with_dummy = scalar_game(lambda s: float(2.5 * (0 in s)))
    phi = permutation_shapley(with_dummy, 3, EstimatorConfig(m=5, seed=seed)).values[:, 0]
    check("permutation_dummy_is_exactly_zero", phi[1] == 0.0 and phi[2] == 0.0)

    pair_game = scalar_game(lambda s: 1.0 if {0, 2} <= s else 0.0)
    exact = exact_shapley(pair_game, 4).values
    approx = permutation_shapley(pair_game, 4, EstimatorConfig(m=200, seed=seed)).values
    worst = float(np.max(np.abs(exact - approx)))
    check("permutation_tracks_exact_interaction", worst < 0.05, f"max err {worst:.4f}")

    random_values = rng.normal(size=16)
    random_game = scalar_game(lambda s: float(sum(random_values[j] for j in s)) ** 2 / 4.0)
    matrix = exact_shapley(random_game, 4)
    total = float(matrix.values[:, 0].sum())
    expected = random_game(frozenset(range(4)))[0] - random_game(frozenset())[0]
    check("exact_efficiency_holds", abs(total - expected) < 1e-9)

    budget = evaluation_budget(100, EstimatorConfig(m=10, antithetic=True))
    check("evaluation_budget_contract", budget == 2002, f"budget {budget}")

    windows = plan_audio_windows(240000, 100)
    check(
        "dynamic_windowing_100ms",
        len(windows) == 100 and all(e - s == 2400 for s, e in windows),
    )

    check("end_to_end_dummy_audio_share_zero", _end_to_end_share("dummy_audio") == 0.0)
    check("end_to_end_dummy_text_share_one", _end_to_end_share("dummy_text") == 1.0)
    balanced = _end_to_end_share("additive")
    check(
        "end_to_end_balanced_share_half",
        balanced is not None and abs(balanced - 0.5) <= 1e-9,
        f"a-shap {balanced}",
    )

    hand = AttributionMatrix(
        np.array([[0.5, -0.5], [0.0, 0.0], [1.5, 1.5]]),
        FeaturePartition(((0, 4),), (1, 2)),
        EstimatorMeta(method="exact"),
    )
    score = modality_contribution(hand)
    check(
        "modality_split_uses_absolute_values",
        score.audio_contribution == 1.0 and score.text_contribution == 3.0 and score.a_shap == 0.25,
    )

    ok = True
    for name, passed, detail in results:
        suffix = f" ({detail})" if detail else ""
        echo(f"[{'PASS' if passed else 'FAIL'}] {name}{suffix}")
        ok = ok and passed
    echo(f"selftest: {sum(p for _, p, _ in results)}/{len(results)} checks passed")
    return ok
