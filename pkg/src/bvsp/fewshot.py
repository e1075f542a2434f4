"""The k-shot episode protocol: per-category support sampling and multi-run averaging.

An episode splits a pool into a support set (k instances per category,
drawn seeded and without replacement, shared instances counting toward every
category they contain) and a query set (everything else). Support sets are
nested across k for a fixed seed: the (k+1)-shot support extends the k-shot
one, which keeps shot-scaling comparisons low-variance.
"""

from __future__ import annotations

import random
import statistics
from dataclasses import dataclass
from typing import Callable

from .errors import EmptyPool
from .evaluation import EvalReport
from .quads import Dataset


@dataclass(frozen=True)
class Episode:
    """A disjoint support/query split of a pool."""

    k: int
    seed: int
    support_ids: tuple[str, ...]
    query_ids: tuple[str, ...]

    def __post_init__(self) -> None:
        overlap = set(self.support_ids) & set(self.query_ids)
        if overlap:
            raise ValueError(f"support and query overlap: {sorted(overlap)[:5]}")


def _category_candidates(pool: Dataset, seed: int) -> dict[str, list[str]]:
    """Per-category candidate id lists, each shuffled by a category-local seed."""
    candidates: dict[str, list[str]] = {}
    for category in pool.categories:
        ids = [s.id for s in pool if category in s.categories]
        random.Random(f"{seed}|{category}").shuffle(ids)
        candidates[category] = ids
    return candidates


def sample_episode(pool: Dataset, k: int, seed: int) -> Episode:
    """Draw a k-shot support set from the pool; the remainder is the query set.

    The support is built in rounds 1..k: round j tops every category (in
    ascending lexicographic order) up to j supporting instances, walking that
    category's pre-shuffled candidate list and counting instances already
    drawn for other categories. Building by rounds makes supports nested
    across increasing k for the same seed. A category with fewer than k
    candidates simply contributes all of them.

    Raises:
        EmptyPool: when the pool has no sentences.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not len(pool):
        raise EmptyPool("cannot sample an episode from an empty pool")

    candidates = _category_candidates(pool, seed)
    categories_of = {s.id: s.categories for s in pool}
    selected: list[str] = []
    chosen: set[str] = set()
    for j in range(1, k + 1):
        for category in pool.categories:
            ids = candidates[category]
            target = min(j, len(ids))
            covered = sum(1 for sid in ids if sid in chosen)
            for sid in ids:
                if covered >= target:
                    break
                if sid in chosen:
                    continue
                selected.append(sid)
                chosen.add(sid)
                covered += 1

    query = tuple(s.id for s in pool if s.id not in chosen)
    return Episode(k=k, seed=seed, support_ids=tuple(selected), query_ids=query)


def split(pool: Dataset, episode: Episode) -> tuple[Dataset, Dataset]:
    """Materialize the support and query datasets of an episode."""
    by_id = pool.by_id()
    support = Dataset(
        name=f"{pool.name}-support", sentences=tuple(by_id[i] for i in episode.support_ids)
    )
    query = Dataset(
        name=f"{pool.name}-query", sentences=tuple(by_id[i] for i in episode.query_ids)
    )
    return support, query


@dataclass(frozen=True)
class ProtocolReport:
    """Per-run evaluation reports plus their mean and sample standard deviation."""

    reports: tuple[EvalReport, ...]
    seeds: tuple[int, ...]

    def _series(self, metric: str) -> list[float]:
        return [getattr(r, metric) for r in self.reports]

    def mean(self, metric: str) -> float:
        return statistics.fmean(self._series(metric))

    def std(self, metric: str) -> float:
        series = self._series(metric)
        return statistics.stdev(series) if len(series) > 1 else 0.0

    def to_dict(self) -> dict:
        return {
            "runs": len(self.reports),
            "seeds": list(self.seeds),
            "per_run": [r.to_dict() for r in self.reports],
            "mean": {m: self.mean(m) for m in ("precision", "recall", "f1")},
            "std": {m: self.std(m) for m in ("precision", "recall", "f1")},
        }


def run_protocol(
    pool: Dataset,
    k: int,
    runs: int,
    pipeline: Callable[[Episode], EvalReport],
    seed: int = 0,
) -> ProtocolReport:
    """Run the episode pipeline ``runs`` times with seeds seed..seed+runs-1."""
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    seeds = tuple(range(seed, seed + runs))
    reports = []
    for run_seed in seeds:
        episode = sample_episode(pool, k, run_seed)
        reports.append(pipeline(episode))
    return ProtocolReport(reports=tuple(reports), seeds=seeds)
