"""Exact and permutation-sampled Shapley attribution over coalition games.

A game is a :class:`ValueFunction`: it maps a coalition of feature indices to
one real value per answer token. ``exact_shapley`` enumerates all ``2^n``
coalitions and applies the standard Shapley weight ``|S|!(n-|S|-1)!/n!``;
``permutation_shapley`` averages marginal contributions along seeded random
feature orderings, traversing each sampled permutation forward and reversed
when antithetic sampling is on. Identical ``(seed, m, n, v)`` inputs
reproduce identical output bit for bit: coalition values are assembled into
marginals by permutation bookkeeping in a fixed order, so batched or parallel
evaluation cannot change results.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, Literal, Sequence

import numpy as np

from .errors import ExactTooLargeError
from .types import AttributionMatrix, Coalition, EstimatorMeta, FeaturePartition

# Hard cap on exact enumeration; 2^20 evaluations is already a stretch for
# anything but closed-form games.
DEFAULT_EXACT_CAP = 20


class ValueFunction:
    """Per-answer-token payoff of a feature coalition.

    ``evaluate`` must be deterministic and defined on every subset of
    ``[0, n)``. ``evaluate_batch``, when given, receives a list of coalitions
    and returns a ``(len, token_count)`` array; estimators use it so a scoring
    backend can batch expensive model calls.
    """

    def __init__(
        self,
        evaluate: Callable[[Coalition], Sequence[float] | np.ndarray],
        token_count: int,
        evaluate_batch: Callable[[list[Coalition]], np.ndarray] | None = None,
    ) -> None:
        if token_count < 1:
            raise ValueError(f"token_count must be >= 1, got {token_count}")
        self.token_count = int(token_count)
        self._evaluate = evaluate
        self._evaluate_batch = evaluate_batch

    def __call__(self, coalition: Coalition) -> np.ndarray:
        values = np.asarray(self._evaluate(frozenset(coalition)), dtype=np.float64).reshape(-1)
        if values.size != self.token_count:
            raise ValueError(
                f"value function returned {values.size} values, expected {self.token_count}"
            )
        return values

    def evaluate_many(self, coalitions: Sequence[Coalition]) -> np.ndarray:
        """Evaluate several coalitions, preserving order."""
        if not coalitions:
            return np.zeros((0, self.token_count))
        if self._evaluate_batch is not None:
            values = np.asarray(self._evaluate_batch(list(coalitions)), dtype=np.float64)
            if values.shape != (len(coalitions), self.token_count):
                raise ValueError(
                    f"batch evaluator returned shape {values.shape}, "
                    f"expected {(len(coalitions), self.token_count)}"
                )
            return values
        return np.stack([self(c) for c in coalitions])


def scalar_game(evaluate: Callable[[Coalition], float]) -> ValueFunction:
    """Wrap a scalar coalition game as a single-token value function."""
    return ValueFunction(lambda s: np.array([evaluate(s)], dtype=np.float64), token_count=1)


@dataclass(frozen=True)
class EstimatorConfig:
    """Estimator selection and sampling parameters."""

    method: Literal["exact", "permutation"] = "permutation"
    m: int = 10
    seed: int = 0
    antithetic: bool = True
    exact_cap: int = DEFAULT_EXACT_CAP

    def __post_init__(self) -> None:
        if self.method not in ("exact", "permutation"):
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.m < 1:
            raise ValueError(f"permutation count m must be >= 1, got {self.m}")
        if self.exact_cap < 1:
            raise ValueError(f"exact_cap must be >= 1, got {self.exact_cap}")


def evaluation_budget(n: int, config: EstimatorConfig) -> int:
    """Exact number of value-function evaluations the estimator will issue.

    Exact enumeration touches every coalition once. Each permutation walk
    evaluates the growing coalition after every added feature (n calls), and
    the empty and full coalitions are evaluated once upfront.
    """
    if n < 1:
        raise ValueError(f"feature count must be >= 1, got {n}")
    if config.method == "exact":
        return 2**n
    walks = config.m * (2 if config.antithetic else 1)
    return walks * n + 2


def _popcounts(n: int) -> np.ndarray:
    """Population count of every mask in [0, 2^n)."""
    counts = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        counts = np.concatenate([counts, counts + 1])
    return counts


def _mask_to_coalition(mask: int) -> Coalition:
    return frozenset(j for j in range(mask.bit_length()) if mask >> j & 1)


def exact_shapley(
    v: ValueFunction,
    n: int,
    *,
    partition: FeaturePartition | None = None,
    exact_cap: int = DEFAULT_EXACT_CAP,
) -> AttributionMatrix:
    """Exact Shapley values by full coalition enumeration.

    For feature j and token t:
    ``phi[j, t] = sum over S not containing j of w(|S|) * (v_t(S + j) - v_t(S))``
    with ``w(s) = s! (n-s-1)! / n!``. Every coalition is evaluated exactly
    once.
    """
    if n < 1:
        raise ValueError(f"feature count must be >= 1, got {n}")
    if n > exact_cap:
        raise ExactTooLargeError(
            f"exact enumeration over {n} features exceeds the cap of {exact_cap} (2^{n} evaluations)"
        )
    total = 1 << n
    table = np.empty((total, v.token_count))
    chunk = 4096
    for start in range(0, total, chunk):
        masks = range(start, min(start + chunk, total))
        table[start : start + len(masks)] = v.evaluate_many(
            [_mask_to_coalition(mask) for mask in masks]
        )

    weights_by_size = np.array(
        [factorial(s) * factorial(n - s - 1) / factorial(n) for s in range(n)]
    )
    sizes = _popcounts(n)
    all_masks = np.arange(total, dtype=np.int64)
    phi = np.zeros((n, v.token_count))
    for j in range(n):
        without_j = all_masks[(all_masks >> j) & 1 == 0]
        w = weights_by_size[sizes[without_j]]
        diffs = table[without_j + (1 << j)] - table[without_j]
        phi[j] = (w[:, None] * diffs).sum(axis=0)

    return AttributionMatrix(phi, partition, EstimatorMeta(method="exact"))


def permutation_shapley(
    v: ValueFunction,
    n: int,
    config: EstimatorConfig | None = None,
    *,
    partition: FeaturePartition | None = None,
) -> AttributionMatrix:
    """Shapley values approximated by averaging marginals over random orderings."""
    if n < 1:
        raise ValueError(f"feature count must be >= 1, got {n}")
    cfg = config if config is not None else EstimatorConfig()

    rng = np.random.default_rng(cfg.seed)
    walks: list[list[int]] = []
    for _ in range(cfg.m):
        order = [int(j) for j in rng.permutation(n)]
        walks.append(order)
        if cfg.antithetic:
            walks.append(order[::-1])

    # Empty and full coalitions are evaluated once upfront; every walk then
    # evaluates each growing prefix, including the full set, so the total call
    # count matches evaluation_budget exactly.
    empty_value = v(frozenset())
    v(frozenset(range(n)))

    prefixes: list[Coalition] = []
    for walk in walks:
        members: set[int] = set()
        for j in walk:
            members.add(j)
            prefixes.append(frozenset(members))
    values = v.evaluate_many(prefixes)

    totals = np.zeros((n, v.token_count))
    cursor = 0
    for walk in walks:
        before = empty_value
        for j in walk:
            after = values[cursor]
            cursor += 1
            totals[j] += after - before
            before = after
    phi = totals / len(walks)

    meta = EstimatorMeta(method="permutation", m=cfg.m, seed=cfg.seed, antithetic=cfg.antithetic)
    return AttributionMatrix(phi, partition, meta)


def estimate_attributions(
    v: ValueFunction,
    n: int,
    config: EstimatorConfig,
    *,
    partition: FeaturePartition | None = None,
) -> AttributionMatrix:
    """Dispatch to the estimator named by the config."""
    if config.method == "exact":
        return exact_shapley(v, n, partition=partition, exact_cap=config.exact_cap)
    return permutation_shapley(v, n, config, partition=partition)
