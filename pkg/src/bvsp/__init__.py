"""Multi-template aspect sentiment quad extraction.

Render review quads through 26 reversible templates, pick the k most
correlated templates on a support set with Jensen-Shannon divergence over
teacher-forced token distributions, aggregate per-template predictions by
voting, and evaluate with exact-match F1.
"""

from .aggregation import default_tau, tally, vote
from .errors import (
    BvspError,
    DuplicateId,
    EmptyFile,
    EmptyPool,
    InvalidBuckets,
    InvalidK,
    InvalidTau,
    MarkerCollision,
    ParseError,
    ProtocolViolation,
    ScorerUnavailable,
    SpanMismatch,
    UnknownPolaritySurface,
)
from .estimator import QuadExtractor
from .evaluation import EvalReport, evaluate, evaluate_elements, split_explicit_implicit
from .fewshot import Episode, run_protocol, sample_episode
from .quads import (
    IMPLICIT,
    Dataset,
    LabeledSentence,
    Polarity,
    SentimentQuad,
    SurfaceQuad,
    canonical_key,
    project,
    unproject,
)
from .remote import RemoteScorer
from .scoring import ReferenceScorer, ScoredTarget, Scorer, TokenDistribution, cross_entropy
from .selection import (
    CorrelationMatrix,
    correlation_matrix,
    filter_element_slots,
    js_divergence,
    pair_divergence,
    select_top_k,
)
from .templates import Template, TargetSequence, get_template, list_templates, parse, render

__version__ = "0.1.0"

__all__ = [
    "BvspError",
    "CorrelationMatrix",
    "Dataset",
    "DuplicateId",
    "EmptyFile",
    "EmptyPool",
    "Episode",
    "EvalReport",
    "IMPLICIT",
    "InvalidBuckets",
    "InvalidK",
    "InvalidTau",
    "LabeledSentence",
    "MarkerCollision",
    "ParseError",
    "Polarity",
    "ProtocolViolation",
    "QuadExtractor",
    "ReferenceScorer",
    "RemoteScorer",
    "ScoredTarget",
    "Scorer",
    "ScorerUnavailable",
    "SentimentQuad",
    "SpanMismatch",
    "SurfaceQuad",
    "TargetSequence",
    "Template",
    "TokenDistribution",
    "UnknownPolaritySurface",
    "canonical_key",
    "correlation_matrix",
    "cross_entropy",
    "default_tau",
    "evaluate",
    "evaluate_elements",
    "filter_element_slots",
    "get_template",
    "js_divergence",
    "list_templates",
    "pair_divergence",
    "parse",
    "project",
    "render",
    "run_protocol",
    "sample_episode",
    "select_top_k",
    "split_explicit_implicit",
    "tally",
    "unproject",
    "vote",
]
