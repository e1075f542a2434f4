"""Scikit-learn style front door for the whole pipeline.

``QuadExtractor.fit`` selects templates on a labeled support set via the
correlation matrix; ``predict`` runs multi-template generation, parsing, and
voting on raw texts. Parameters follow the estimator convention (stored
verbatim in ``__init__``, derived state in trailing-underscore attributes),
so the extractor composes with ``clone``, ``get_params``/``set_params``, and
friends.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator

from . import aggregation
from .evaluation import evaluate
from .pipeline import aggregate_rows, predict_rows, select_templates
from .quads import LabeledSentence, SentimentQuad
from .scoring import ReferenceScorer, Scorer


def check_support(X, y) -> list[LabeledSentence]:
    """Validate and normalize fit inputs into labeled sentences.

    Accepts either a sequence of :class:`LabeledSentence` (``y=None``) or a
    sequence of texts with a parallel sequence of quad collections.
    """
    X = list(X)
    if not X:
        raise ValueError("fit needs at least one support sentence")
    if all(isinstance(x, LabeledSentence) for x in X):
        if y is not None:
            raise ValueError("y must be None when X already carries quads")
        return X
    if y is None:
        raise ValueError("y (quads per sentence) is required when X holds raw texts")
    y = list(y)
    if len(X) != len(y):
        raise ValueError(f"X and y lengths differ: {len(X)} vs {len(y)}")
    sentences = []
    for i, (text, quads) in enumerate(zip(X, y)):
        if not isinstance(text, str):
            raise ValueError(f"X[{i}] is not a string")
        quads = tuple(quads)
        if not all(isinstance(q, SentimentQuad) for q in quads):
            raise ValueError(f"y[{i}] must contain SentimentQuad values")
        sentences.append(LabeledSentence(id=str(i), text=text, quads=quads))
    return sentences


def check_texts(X) -> list[str]:
    X = list(X)
    if not all(isinstance(x, str) for x in X):
        raise ValueError("predict expects a sequence of strings")
    return X


class QuadExtractor(BaseEstimator):
    """Multi-template quad extraction with divergence-guided template selection.

    Parameters
    ----------
    k_templates : number of templates to select on fit.
    tau : voting threshold; ``None`` means majority of ``k_templates``.
    scorer : a :class:`bvsp.scoring.Scorer`; ``None`` builds a reference
        scorer from ``seed``.
    selection_strategy : ``js_min`` (default) or an ablation strategy.
    aggregation_strategy : ``vote`` (default), ``rank``, or ``rand``.
    seed : drives every random choice, including the default scorer.
    jobs : worker threads for scoring and generation fan-out.
    """

    def __init__(
        self,
        k_templates: int = 3,
        tau: int | None = None,
        scorer: Scorer | None = None,
        selection_strategy: str = "js_min",
        aggregation_strategy: str = "vote",
        seed: int = 42,
        jobs: int = 1,
    ) -> None:
        self.k_templates = k_templates
        self.tau = tau
        self.scorer = scorer
        self.selection_strategy = selection_strategy
        self.aggregation_strategy = aggregation_strategy
        self.seed = seed
        self.jobs = jobs

    def _effective_scorer(self) -> Scorer:
        return self.scorer if self.scorer is not None else ReferenceScorer(seed=self.seed)

    def fit(self, X, y=None) -> "QuadExtractor":
        """Select templates on the support set; returns self."""
        support = check_support(X, y)
        scorer = self._effective_scorer()
        result = select_templates(
            support,
            scorer,
            self.k_templates,
            strategy=self.selection_strategy,
            seed=self.seed,
            jobs=self.jobs,
        )
        self.scorer_ = scorer
        self.correlation_ = result.matrix
        self.template_ids_ = result.selected_ids
        self.tau_ = self.tau if self.tau is not None else aggregation.default_tau(self.k_templates)
        return self

    def predict(self, X) -> list[list[SentimentQuad]]:
        """Extract a final quad set for each text."""
        self._check_fitted()
        texts = check_texts(X)
        sentences = [LabeledSentence(id=str(i), text=t, quads=()) for i, t in enumerate(texts)]
        rows = predict_rows(sentences, self.template_ids_, self.scorer_, jobs=self.jobs)
        final = aggregate_rows(
            rows,
            self.tau_,
            strategy=self.aggregation_strategy,
            scorer=self.scorer_,
            seed=self.seed,
        )
        by_id = dict(final)
        return [by_id.get(str(i), []) for i in range(len(texts))]

    def score(self, X, y) -> float:
        """Micro-averaged quad F1 of ``predict(X)`` against gold quads ``y``."""
        predictions = self.predict(X)
        gold = [(str(i), tuple(quads)) for i, quads in enumerate(y)]
        pred = [(str(i), tuple(quads)) for i, quads in enumerate(predictions)]
        return evaluate(gold, pred).f1

    def _check_fitted(self) -> None:
        if not hasattr(self, "template_ids_"):
            raise RuntimeError("this QuadExtractor instance is not fitted yet; call fit first")
