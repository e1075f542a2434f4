"""Exact-match evaluation: quad-level, element-level, and explicit/implicit subsets.

All metrics are micro-averaged over the corpus (summed counts); a
per-sentence macro average is available as an option for the quad level.
Matching uses the canonical quad equality from :mod:`bvsp.quads`:
case-insensitive, whitespace-normalized, implicit equals only implicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import DuplicateId
from .quads import IMPLICIT, LabeledSentence, SentimentQuad, canonical_key, normalize_text

ROLES = ("aspect_term", "opinion_term", "aspect_category", "sentiment_polarity")

GoldOrPred = Sequence[tuple[str, Iterable[SentimentQuad]]]


@dataclass(frozen=True)
class MetricCounts:
    """tp/fp/fn with derived precision, recall, and F1 (0/0 defined as 0)."""

    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other: "MetricCounts") -> "MetricCounts":
        return MetricCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }


@dataclass(frozen=True)
class EvalReport:
    """Quad-level metrics plus per-element and explicit/implicit breakdowns."""

    quad: MetricCounts
    elements: dict[str, MetricCounts]
    subsets: dict[str, MetricCounts]
    n_sentences: int
    average: str = "micro"
    macro_precision: float | None = field(default=None, compare=False)
    macro_recall: float | None = field(default=None, compare=False)
    macro_f1: float | None = field(default=None, compare=False)

    @property
    def precision(self) -> float:
        return self.macro_precision if self.average == "macro" else self.quad.precision

    @property
    def recall(self) -> float:
        return self.macro_recall if self.average == "macro" else self.quad.recall

    @property
    def f1(self) -> float:
        return self.macro_f1 if self.average == "macro" else self.quad.f1

    def to_dict(self) -> dict:
        out = {
            "average": self.average,
            "n_sentences": self.n_sentences,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "quad": self.quad.to_dict(),
            "elements": {role: m.to_dict() for role, m in self.elements.items()},
            "subsets": {name: m.to_dict() for name, m in self.subsets.items()},
        }
        return out


def _materialize(pairs: GoldOrPred, label: str) -> dict[str, list[SentimentQuad]]:
    out: dict[str, list[SentimentQuad]] = {}
    for sid, quads in pairs:
        if sid in out:
            raise DuplicateId(f"id {sid!r} occurs twice in {label}")
        out[sid] = list(quads)
    return out


def _role_key(quad: SentimentQuad, role: str) -> tuple:
    value = getattr(quad, role)
    if role == "sentiment_polarity":
        return (value.name,)
    if value is IMPLICIT:
        return (0, "")
    return (1, normalize_text(value))


def _count(gold_keys: set, pred_keys: set) -> MetricCounts:
    tp = len(gold_keys & pred_keys)
    return MetricCounts(tp=tp, fp=len(pred_keys) - tp, fn=len(gold_keys) - tp)


def evaluate(gold: GoldOrPred, pred: GoldOrPred, average: str = "micro") -> EvalReport:
    """Score predictions against gold annotations.

    Ids present in gold but missing from pred count as empty predictions;
    pred ids must be a subset of gold ids.

    Raises:
        DuplicateId: if an id repeats within gold or within pred.
    """
    if average not in ("micro", "macro"):
        raise ValueError(f"average must be 'micro' or 'macro', got {average!r}")
    gold_quads = _materialize(gold, "gold")
    pred_quads = _materialize(pred, "pred")
    unknown = set(pred_quads) - set(gold_quads)
    if unknown:
        raise ValueError(f"pred ids not present in gold: {sorted(unknown)[:5]}")

    gold_by_id = {sid: {canonical_key(q) for q in quads} for sid, quads in gold_quads.items()}
    pred_by_id = {sid: {canonical_key(q) for q in quads} for sid, quads in pred_quads.items()}

    quad_total = MetricCounts()
    element_totals = {role: MetricCounts() for role in ROLES}
    subset_totals = {"explicit": MetricCounts(), "implicit": MetricCounts()}
    per_sentence: list[MetricCounts] = []

    for sid in gold_by_id:
        g = gold_by_id[sid]
        p = pred_by_id.get(sid, set())
        counts = _count(g, p)
        quad_total += counts
        per_sentence.append(counts)

        explicit = all(
            q.aspect_term is not IMPLICIT and q.opinion_term is not IMPLICIT
            for q in gold_quads[sid]
        )
        subset_totals["explicit" if explicit else "implicit"] += counts

        for role in ROLES:
            g_role = {_role_key(q, role) for q in gold_quads[sid]}
            p_role = {_role_key(q, role) for q in pred_quads.get(sid, [])}
            element_totals[role] += _count(g_role, p_role)

    macro_p = macro_r = macro_f = None
    if average == "macro":
        ps, rs, fs = [], [], []
        for counts in per_sentence:
            if counts.tp == counts.fp == counts.fn == 0:
                # both sides empty: a correctly predicted empty sentence
                ps.append(1.0), rs.append(1.0), fs.append(1.0)
            else:
                ps.append(counts.precision), rs.append(counts.recall), fs.append(counts.f1)
        n = len(per_sentence) or 1
        macro_p, macro_r, macro_f = sum(ps) / n, sum(rs) / n, sum(fs) / n

    return EvalReport(
        quad=quad_total,
        elements=element_totals,
        subsets=subset_totals,
        n_sentences=len(gold_by_id),
        average=average,
        macro_precision=macro_p,
        macro_recall=macro_r,
        macro_f1=macro_f,
    )


def evaluate_elements(gold: GoldOrPred, pred: GoldOrPred) -> dict[str, MetricCounts]:
    """Per-role F1 over role values extracted from quads, deduplicated per sentence."""
    return evaluate(gold, pred).elements


def split_explicit_implicit(
    sentences: Iterable[LabeledSentence],
) -> tuple[list[str], list[str]]:
    """Partition sentence ids: explicit iff every gold quad has explicit terms.

    A sentence with any implicit aspect or opinion term goes to the implicit
    subset; a sentence without quads is vacuously explicit.
    """
    explicit_ids: list[str] = []
    implicit_ids: list[str] = []
    for sentence in sentences:
        if all(
            q.aspect_term is not IMPLICIT and q.opinion_term is not IMPLICIT
            for q in sentence.quads
        ):
            explicit_ids.append(sentence.id)
        else:
            implicit_ids.append(sentence.id)
    return explicit_ids, implicit_ids
