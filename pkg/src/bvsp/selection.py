"""Divergence-guided template selection.

Given a support set, every instance is rendered and scored under every
template; the distributions at element token positions (linking symbols
filtered out) are compared pairwise with Jensen-Shannon divergence, averaged
over aligned tokens and then over the support set into a symmetric
correlation matrix. Smaller entries mean more correlated templates; the
selector walks the smallest matrix entries and keeps the k templates they
touch.
"""

from __future__ import annotations

import logging
import math
import random
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidK, SpanMismatch
from .quads import LabeledSentence, project
from .scoring import ScoredTarget, Scorer, TokenDistribution
from .templates import Role, TargetSequence, Template, render

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
_SYM_TOL = 1e-12

STRATEGIES = ("js_min", "js_max", "entropy_min", "entropy_max", "random")


@dataclass(frozen=True)
class Slot:
    """One element token position kept by filtering."""

    quad_index: int
    role: Role
    token_index: int
    token_text: str
    distribution: TokenDistribution


@dataclass(frozen=True)
class FilteredRepresentation:
    """The element-token slots of one scored target, linking symbols removed."""

    slots: tuple[Slot, ...]


def filter_element_slots(scored: ScoredTarget, target: TargetSequence) -> FilteredRepresentation:
    """Keep distributions at token positions that overlap an element span.

    Raises:
        SpanMismatch: if ``scored`` does not score exactly ``target.text``.
    """
    if scored.target_text != target.text:
        raise SpanMismatch(
            f"scored text {scored.target_text!r} does not match target {target.text!r}"
        )
    slots: list[Slot] = []
    counters: dict[tuple[int, Role], int] = defaultdict(int)
    for token, dist in zip(scored.tokens, scored.distributions):
        for span in target.element_spans:
            if token.start < span.end and span.start < token.end:
                key = (span.quad_index, span.role)
                slots.append(
                    Slot(
                        quad_index=span.quad_index,
                        role=span.role,
                        token_index=counters[key],
                        token_text=token.text,
                        distribution=dist,
                    )
                )
                counters[key] += 1
                break
    return FilteredRepresentation(slots=tuple(slots))


def js_divergence(p: TokenDistribution, q: TokenDistribution) -> float:
    """Jensen-Shannon divergence in nats over the union of supports plus OTHER.

    Symmetric, bounded by ln 2, and exactly zero for identical inputs.
    """
    keys: list[str] = [k for k, _ in p.support]
    seen = set(keys)
    for k, _ in q.support:
        if k not in seen:
            seen.add(k)
            keys.append(k)
    pd = p.as_dict()
    qd = q.as_dict()
    acc = 0.0
    for key in keys:
        pi = pd.get(key, 0.0)
        qi = qd.get(key, 0.0)
        m = 0.5 * (pi + qi)
        if pi > 0.0:
            acc += 0.5 * pi * math.log(pi / m)
        if qi > 0.0:
            acc += 0.5 * qi * math.log(qi / m)
    pi, qi = p.other_mass, q.other_mass
    m = 0.5 * (pi + qi)
    if pi > 0.0:
        acc += 0.5 * pi * math.log(pi / m)
    if qi > 0.0:
        acc += 0.5 * qi * math.log(qi / m)
    return acc if acc > 0.0 else 0.0


def pair_divergence(hi: FilteredRepresentation, hj: FilteredRepresentation) -> float:
    """Mean JS divergence over slots aligned by (quad, role, token index).

    Each element is truncated to the shorter of the two token counts;
    returns 0 (with a warning) when nothing aligns.
    """
    groups_i: dict[tuple[int, Role], list[Slot]] = defaultdict(list)
    groups_j: dict[tuple[int, Role], list[Slot]] = defaultdict(list)
    for slot in hi.slots:
        groups_i[(slot.quad_index, slot.role)].append(slot)
    for slot in hj.slots:
        groups_j[(slot.quad_index, slot.role)].append(slot)

    total = 0.0
    count = 0
    for key in sorted(groups_i.keys(), key=lambda k: (k[0], k[1].value)):
        if key not in groups_j:
            continue
        a, b = groups_i[key], groups_j[key]
        for t in range(min(len(a), len(b))):
            total += js_divergence(a[t].distribution, b[t].distribution)
            count += 1
    if count == 0:
        logger.warning("no aligned element slots between two filtered representations")
        return 0.0
    return total / count


@dataclass(frozen=True)
class CorrelationMatrix:
    """T x T support-set-averaged divergences between templates."""

    template_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        t = len(self.template_ids)
        if v.shape != (t, t):
            raise ValueError(f"matrix shape {v.shape} does not match {t} template ids")
        if np.any(np.abs(np.diagonal(v)) > 0.0):
            raise ValueError("diagonal must be exactly zero")
        if np.max(np.abs(v - v.T), initial=0.0) > _SYM_TOL:
            raise ValueError("matrix must be symmetric")
        if np.any(v < 0.0) or np.any(v > LN2 + _SYM_TOL):
            raise ValueError("entries must lie in [0, ln 2]")

    def entry(self, id_a: str, id_b: str) -> float:
        i = self.template_ids.index(id_a)
        j = self.template_ids.index(id_b)
        return float(self.values[i, j])

    def row_mean(self, template_id: str) -> float:
        """Mean correlation of one template with the others (diagonal excluded)."""
        i = self.template_ids.index(template_id)
        t = len(self.template_ids)
        if t == 1:
            return 0.0
        return float(np.sum(self.values[i])) / (t - 1)


def _map_maybe_parallel(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))  # map preserves order => deterministic reduction


def score_support_instance(
    sentence: LabeledSentence, templates: Sequence[Template], scorer: Scorer
) -> dict[str, FilteredRepresentation]:
    """Render, score, and filter one instance under every template."""
    surface = [project(q) for q in sentence.quads]
    reps: dict[str, FilteredRepresentation] = {}
    for template in templates:
        target = render(surface, template)
        scored = scorer.score(sentence.text, target, template.id, prefix_id=template.id)
        reps[template.id] = filter_element_slots(scored, target)
    return reps


def correlation_matrix(
    support: Sequence[LabeledSentence],
    templates: Sequence[Template],
    scorer: Scorer,
    jobs: int = 1,
) -> CorrelationMatrix:
    """Average pairwise template divergence over the support set.

    Instances without quads cannot be rendered and are skipped with a
    warning; at least one usable instance is required.
    """
    usable = [s for s in support if s.quads]
    skipped = len(support) - len(usable)
    if skipped:
        logger.warning("skipping %d support instance(s) without quads", skipped)
    if not usable:
        raise ValueError("support set holds no instance with quads")

    reps = _map_maybe_parallel(
        lambda s: score_support_instance(s, templates, scorer), usable, jobs
    )

    t = len(templates)
    values = np.zeros((t, t), dtype=np.float64)
    for i in range(t):
        for j in range(i + 1, t):
            total = 0.0
            for rep in reps:  # fixed instance order => run-to-run identical
                total += pair_divergence(rep[templates[i].id], rep[templates[j].id])
            values[i, j] = values[j, i] = total / len(reps)
    return CorrelationMatrix(
        template_ids=tuple(tm.id for tm in templates), values=values
    )


def _walk_pairs(matrix: CorrelationMatrix, k: int, descending: bool) -> list[str]:
    ids = matrix.template_ids
    t = len(ids)
    pairs = []
    for i in range(t):
        for j in range(i + 1, t):
            pair = tuple(sorted((ids[i], ids[j])))
            pairs.append((float(matrix.values[i, j]), pair))
    pairs.sort(key=lambda item: (-item[0] if descending else item[0], item[1]))

    selected: list[str] = []
    chosen = set()
    for _, (a, b) in pairs:
        if len(selected) >= k:
            break
        new = [e for e in (a, b) if e not in chosen]
        if len(selected) + len(new) <= k:
            for e in new:
                selected.append(e)
                chosen.add(e)
        else:
            # Adding both would overshoot; keep the endpoint that sits in the
            # more correlated neighborhood (smaller row mean), id as tie-break.
            keep = min(new, key=lambda e: (matrix.row_mean(e), e))
            selected.append(keep)
            chosen.add(keep)
    return selected


def select_top_k(matrix: CorrelationMatrix, k: int) -> list[str]:
    """Template ids touched by the k smallest correlation entries.

    Walks the off-diagonal upper-triangle entries in ascending order (ties
    broken by the lexicographic id pair) and inserts both endpoints of each
    pair until k templates are collected; when the final pair would
    overshoot, only its smaller-row-mean endpoint is kept.

    Raises:
        InvalidK: when k is outside [1, T].
    """
    t = len(matrix.template_ids)
    if k < 1 or k > t:
        raise InvalidK(f"k must lie in [1, {t}], got {k}")
    if t == 1:
        return list(matrix.template_ids)
    return _walk_pairs(matrix, k, descending=False)


def select_templates(
    matrix: CorrelationMatrix,
    k: int,
    strategy: str = "js_min",
    seed: int = 0,
    entropies: dict[str, float] | None = None,
) -> list[str]:
    """Apply one of the selection strategies; ``js_min`` is the production path.

    The alternatives exist for ablations: ``js_max`` walks the largest
    entries, ``entropy_min``/``entropy_max`` rank templates by their mean
    element-token entropy (supplied by :func:`template_entropies`), and
    ``random`` draws a seeded sample.
    """
    t = len(matrix.template_ids)
    if k < 1 or k > t:
        raise InvalidK(f"k must lie in [1, {t}], got {k}")
    if strategy == "js_min":
        return select_top_k(matrix, k)
    if strategy == "js_max":
        if t == 1:
            return list(matrix.template_ids)
        return _walk_pairs(matrix, k, descending=True)
    if strategy in ("entropy_min", "entropy_max"):
        if entropies is None:
            raise ValueError(f"strategy {strategy!r} needs template entropies")
        reverse = strategy == "entropy_max"
        ranked = sorted(
            matrix.template_ids,
            key=lambda tid: ((-entropies[tid]) if reverse else entropies[tid], tid),
        )
        return ranked[:k]
    if strategy == "random":
        return random.Random(seed).sample(list(matrix.template_ids), k)
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def template_entropies(
    support: Sequence[LabeledSentence],
    templates: Sequence[Template],
    scorer: Scorer,
    jobs: int = 1,
) -> dict[str, float]:
    """Mean entropy of element-token distributions per template over the support."""
    usable = [s for s in support if s.quads]
    if not usable:
        raise ValueError("support set holds no instance with quads")
    reps = _map_maybe_parallel(
        lambda s: score_support_instance(s, templates, scorer), usable, jobs
    )
    out: dict[str, float] = {}
    for template in templates:
        total = 0.0
        count = 0
        for rep in reps:
            for slot in rep[template.id].slots:
                total += slot.distribution.entropy()
                count += 1
        out[template.id] = total / count if count else 0.0
    return out
