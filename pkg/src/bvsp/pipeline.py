"""Composable pipeline stages: select, predict, aggregate, evaluate.

These functions wire the lower-level modules together for the CLI, the
estimator, and the few-shot protocol. All fan-out is order-preserving, so
results are identical for any worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from . import aggregation, selection
from .errors import UnknownPolaritySurface
from .evaluation import EvalReport, evaluate
from .fewshot import Episode, split
from .quads import Dataset, LabeledSentence, SentimentQuad, unproject
from .remote import RemoteScorer
from .scoring import ReferenceScorer, Scorer, cross_entropy, plain_target
from .selection import CorrelationMatrix
from .templates import Template, get_template, list_templates, parse


def build_scorer(
    kind: str,
    seed: int = 42,
    endpoint: str | None = None,
    timeout_ms: int = 10_000,
    top_m: int = 50,
) -> Scorer:
    """Construct a scorer from CLI-style configuration."""
    if kind == "reference":
        return ReferenceScorer(seed=seed, top_m=top_m)
    if kind == "remote":
        endpoint = endpoint or os.environ.get("BVSP_ENDPOINT")
        if not endpoint:
            raise ValueError("remote scorer needs --endpoint or BVSP_ENDPOINT")
        return RemoteScorer(endpoint=endpoint, timeout_ms=timeout_ms, top_m=top_m)
    raise ValueError(f"unknown scorer kind {kind!r}")


@dataclass(frozen=True)
class SelectionResult:
    matrix: CorrelationMatrix
    selected_ids: tuple[str, ...]
    strategy: str


def select_templates(
    support: Sequence[LabeledSentence],
    scorer: Scorer,
    k: int,
    strategy: str = "js_min",
    seed: int = 0,
    jobs: int = 1,
    templates: Sequence[Template] | None = None,
) -> SelectionResult:
    """Build the correlation matrix over the support set and pick k templates."""
    templates = list(templates) if templates is not None else list_templates()
    matrix = selection.correlation_matrix(support, templates, scorer, jobs=jobs)
    entropies = None
    if strategy in ("entropy_min", "entropy_max"):
        entropies = selection.template_entropies(support, templates, scorer, jobs=jobs)
    selected = selection.select_templates(matrix, k, strategy=strategy, seed=seed, entropies=entropies)
    return SelectionResult(matrix=matrix, selected_ids=tuple(selected), strategy=strategy)


@dataclass(frozen=True)
class PredictionRow:
    """One template's prediction for one sentence."""

    sentence_id: str
    template_id: str
    quads: tuple[SentimentQuad, ...]
    malformed_count: int
    generated_text: str


def _predict_one(sentence: LabeledSentence, template: Template, scorer: Scorer) -> PredictionRow:
    text = scorer.generate(sentence.text, template.id, prefix_id=template.id, num_beams=1)
    result = parse(text, template)
    quads = []
    for surface in result.quads:
        try:
            quads.append(unproject(surface))
        except UnknownPolaritySurface:  # parse already filters these; belt and braces
            continue
    return PredictionRow(
        sentence_id=sentence.id,
        template_id=template.id,
        quads=tuple(quads),
        malformed_count=result.malformed_count,
        generated_text=text,
    )


def predict_rows(
    sentences: Sequence[LabeledSentence],
    template_ids: Sequence[str],
    scorer: Scorer,
    jobs: int = 1,
) -> list[PredictionRow]:
    """Generate and parse per-template predictions for every sentence.

    Rows come back grouped by sentence in input order, templates in the
    given order, regardless of ``jobs``.
    """
    templates = [get_template(tid) for tid in template_ids]
    work = [(s, t) for s in sentences for t in templates]
    if jobs <= 1 or len(work) <= 1:
        return [_predict_one(s, t, scorer) for s, t in work]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda st: _predict_one(*st, scorer), work))


def aggregate_rows(
    rows: Sequence[PredictionRow],
    tau: int | None,
    strategy: str = "vote",
    scorer: Scorer | None = None,
    seed: int = 0,
) -> list[tuple[str, list[SentimentQuad]]]:
    """Combine per-template rows into one prediction set per sentence.

    ``vote`` applies the frequency threshold tau (default: majority of the
    participating templates). ``rank`` keeps the single template whose
    generated sequence has the lowest mean token cross-entropy under the
    scorer; ``rand`` keeps one seeded-random template. Sentence order
    follows first appearance in ``rows``.
    """
    template_ids = sorted({r.template_id for r in rows})
    k = len(template_ids)
    by_sentence: dict[str, dict[str, PredictionRow]] = {}
    for row in rows:
        by_sentence.setdefault(row.sentence_id, {})[row.template_id] = row

    if tau is None:
        tau = aggregation.default_tau(max(k, 1))

    out: list[tuple[str, list[SentimentQuad]]] = []
    for sentence_id, per_template in by_sentence.items():
        predictions = [
            (tid, per_template[tid].quads if tid in per_template else ())
            for tid in template_ids
        ]
        if strategy == "vote":
            final = aggregation.vote(predictions, tau)
        elif strategy == "rank":
            if scorer is None:
                raise ValueError("rank aggregation needs a scorer for perplexity")
            perplexities = {}
            for tid in template_ids:
                row = per_template.get(tid)
                if row is None or not row.generated_text.strip():
                    continue
                scored = scorer.score(
                    "", plain_target(row.generated_text), tid, prefix_id=tid
                )
                perplexities[tid] = cross_entropy(scored, mean=True)
            final = aggregation.pick_by_rank(predictions, perplexities)
        elif strategy == "rand":
            final = aggregation.pick_random(predictions, seed)
        else:
            raise ValueError(
                f"unknown aggregation strategy {strategy!r}; "
                f"expected one of {aggregation.AGGREGATION_STRATEGIES}"
            )
        out.append((sentence_id, final))
    return out


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one end-to-end run needs besides the data."""

    scorer: Scorer
    k_templates: int = 3
    tau: int | None = None
    selection_strategy: str = "js_min"
    aggregation_strategy: str = "vote"
    seed: int = 42
    jobs: int = 1


@dataclass(frozen=True)
class RunArtifacts:
    selection: SelectionResult
    rows: tuple[PredictionRow, ...]
    final: tuple[tuple[str, tuple[SentimentQuad, ...]], ...]
    report: EvalReport


def run_on_datasets(support: Dataset, query: Dataset, config: PipelineConfig) -> RunArtifacts:
    """Select on the support set, predict on the query set, vote, evaluate."""
    sel = select_templates(
        list(support),
        config.scorer,
        config.k_templates,
        strategy=config.selection_strategy,
        seed=config.seed,
        jobs=config.jobs,
    )
    rows = predict_rows(list(query), sel.selected_ids, config.scorer, jobs=config.jobs)
    tau = config.tau if config.tau is not None else aggregation.default_tau(config.k_templates)
    final = aggregate_rows(
        rows, tau, strategy=config.aggregation_strategy, scorer=config.scorer, seed=config.seed
    )
    gold = [(s.id, s.quads) for s in query]
    report = evaluate(gold, final)
    return RunArtifacts(
        selection=sel,
        rows=tuple(rows),
        final=tuple((sid, tuple(quads)) for sid, quads in final),
        report=report,
    )


def episode_pipeline(pool: Dataset, config: PipelineConfig):
    """A pipeline callable for :func:`bvsp.fewshot.run_protocol`."""

    def run(episode: Episode) -> EvalReport:
        support, query = split(pool, episode)
        return run_on_datasets(support, query, config).report

    return run
