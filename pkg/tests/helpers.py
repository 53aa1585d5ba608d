"""Shared test utilities: independent oracles and synthetic game factories."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from modshap import AudioClip


def shapley_by_full_permutation_enumeration(evaluate, n: int, token_count: int = 1) -> np.ndarray:
    """Independent oracle: average marginals over all n! feature orderings.

    This is the permutation definition of the Shapley value, computed without
    subset weights, so it cross-checks the enumeration-with-weights route.
    """
    cache: dict[frozenset, np.ndarray] = {}

    def value(coalition: frozenset) -> np.ndarray:
        if coalition not in cache:
            cache[coalition] = np.asarray(evaluate(coalition), dtype=np.float64).reshape(-1)
        return cache[coalition]

    totals = np.zeros((n, token_count))
    for perm in itertools.permutations(range(n)):
        members: set[int] = set()
        before = value(frozenset())
        for j in perm:
            members.add(j)
            after = value(frozenset(members))
            totals[j] += after - before
            before = after
    return totals / math.factorial(n)


@dataclass
class RandomGame:
    """Additive weights + pair bonuses + guaranteed dummy features."""

    n: int
    weights: np.ndarray
    pairs: list[tuple[int, int]]
    bonuses: np.ndarray
    dummy_indices: list[int]
    base: float = 0.0
    calls: int = field(default=0)

    def __call__(self, coalition: frozenset) -> float:
        self.calls += 1
        value = self.base + float(sum(self.weights[j] for j in coalition))
        for (a, b), bonus in zip(self.pairs, self.bonuses):
            if a in coalition and b in coalition:
                value += float(bonus)
        return value

    def exact_phi(self) -> np.ndarray:
        """Closed form: own weight plus half of each incident pair bonus."""
        phi = self.weights.astype(np.float64).copy()
        for (a, b), bonus in zip(self.pairs, self.bonuses):
            phi[a] += bonus / 2.0
            phi[b] += bonus / 2.0
        return phi


def make_random_game(rng: np.random.Generator, n: int) -> RandomGame:
    weights = rng.uniform(-1.0, 1.0, size=n)
    dummy_indices = sorted(rng.choice(n, size=rng.integers(0, max(1, n // 3) + 1), replace=False).tolist())
    weights[dummy_indices] = 0.0
    active = [j for j in range(n) if j not in dummy_indices]
    pairs: list[tuple[int, int]] = []
    if len(active) >= 2:
        n_pairs = int(rng.integers(0, len(active) // 2 + 1))
        pool = list(active)
        rng.shuffle(pool)
        for k in range(n_pairs):
            pairs.append((min(pool[2 * k], pool[2 * k + 1]), max(pool[2 * k], pool[2 * k + 1])))
    bonuses = rng.uniform(-1.0, 1.0, size=len(pairs))
    return RandomGame(
        n=n,
        weights=weights,
        pairs=pairs,
        bonuses=bonuses,
        dummy_indices=dummy_indices,
        base=float(rng.uniform(-1.0, 1.0)),
    )


def nonzero_clip(n_samples: int, rate: int = 16000, seed: int = 0) -> AudioClip:
    """A clip whose every sample is nonzero, so no window reads as masked."""
    rng = np.random.default_rng(seed)
    samples = rng.uniform(0.1, 0.8, size=n_samples) * rng.choice([-1.0, 1.0], size=n_samples)
    return AudioClip(samples=samples, sample_rate_hz=rate)


STRUCTURED_PROMPT = (
    "You're a reliable assistant, follow these instructions.\n"
    "<audio>\n"
    "<|question|> Question: Which sound interrupts the melody ?\n"
    "(A) Doorbell\n(B) Horn\n(C) Whistle\n(D) Applause <|answer|>"
)
