"""Combine per-template quad predictions into one final set by voting."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import InvalidTau
from .quads import SentimentQuad, canonical_key, canonical_quad

AGGREGATION_STRATEGIES = ("vote", "rank", "rand")


def default_tau(k: int) -> int:
    """Majority threshold: half the template count, rounded up."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return (k + 1) // 2


@dataclass(frozen=True)
class VoteTally:
    """Vote counts per canonical quad across k templates."""

    counts: Mapping[SentimentQuad, int]
    k: int
    tau: int

    def __post_init__(self) -> None:
        if not 1 <= self.tau <= self.k:
            raise InvalidTau(f"tau must lie in [1, {self.k}], got {self.tau}")
        for quad, count in self.counts.items():
            if not 0 <= count <= self.k:
                raise ValueError(f"count {count} for {quad} outside [0, {self.k}]")


def tally(
    predictions: Sequence[tuple[str, Iterable[SentimentQuad]]], tau: int
) -> VoteTally:
    """Count, per quad, how many templates predicted it.

    Each template contributes a set: duplicates within one template count
    once. Quad identity is the canonical (case- and whitespace-insensitive)
    form.
    """
    k = len(predictions)
    if not 1 <= tau <= k:
        raise InvalidTau(f"tau must lie in [1, {k}], got {tau}")
    counts: dict[SentimentQuad, int] = {}
    for _, quads in predictions:
        seen: set[tuple] = set()
        for quad in quads:
            key = canonical_key(quad)
            if key in seen:
                continue
            seen.add(key)
            rep = canonical_quad(quad)
            counts[rep] = counts.get(rep, 0) + 1
    return VoteTally(counts=counts, k=k, tau=tau)


def vote(
    predictions: Sequence[tuple[str, Iterable[SentimentQuad]]], tau: int
) -> list[SentimentQuad]:
    """Quads predicted by at least ``tau`` of the templates.

    tau=1 degenerates to the union of all predictions and tau=k to their
    intersection. The result is sorted by canonical key, so it does not
    depend on the order of the template list.

    Raises:
        InvalidTau: when tau is outside [1, number of templates].
    """
    t = tally(predictions, tau)
    kept = [quad for quad, count in t.counts.items() if count >= tau]
    kept.sort(key=canonical_key)
    return kept


def pick_by_rank(
    predictions: Sequence[tuple[str, Iterable[SentimentQuad]]],
    perplexities: Mapping[str, float],
) -> list[SentimentQuad]:
    """Ablation: keep the single template whose generation scored the lowest perplexity."""
    if not predictions:
        return []
    best = min(predictions, key=lambda item: (perplexities.get(item[0], float("inf")), item[0]))
    return _dedup(best[1])


def pick_random(
    predictions: Sequence[tuple[str, Iterable[SentimentQuad]]], seed: int
) -> list[SentimentQuad]:
    """Ablation: keep one template's predictions, drawn with a seeded RNG."""
    if not predictions:
        return []
    ordered = sorted(predictions, key=lambda item: item[0])
    chosen = random.Random(seed).choice(ordered)
    return _dedup(chosen[1])


def _dedup(quads: Iterable[SentimentQuad]) -> list[SentimentQuad]:
    seen: set[tuple] = set()
    out = []
    for quad in quads:
        key = canonical_key(quad)
        if key not in seen:
            seen.add(key)
            out.append(canonical_quad(quad))
    out.sort(key=canonical_key)
    return out
