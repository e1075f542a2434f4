"""Dataset ingestion, emission, and corpus statistics.

Two on-disk formats are supported:

* ``quad-lines``: one sentence per line as
  ``sentence####[['aspect', 'category', 'positive', 'opinion'], ...]``
  with the literal string ``NULL`` denoting implicit elements and quads
  ordered (aspect term, category, polarity word, opinion term) — the common
  released-corpus convention.
* ``jsonl``: one ``{"id": ..., "text": ..., "quads": [{"at", "ot", "ac",
  "sp"}, ...]}`` object per line with ``null`` for implicit elements.
"""

from __future__ import annotations

import ast
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .errors import EmptyFile, InvalidBuckets, ParseError
from .quads import (
    IMPLICIT,
    Dataset,
    LabeledSentence,
    Polarity,
    SentimentQuad,
    normalize_text,
)

logger = logging.getLogger(__name__)

FORMATS = ("quad-lines", "jsonl")

_POLARITY_WORDS = {p.value: p for p in Polarity}


def _term_from_disk(value: object) -> object:
    if value is None or value == "NULL":
        return IMPLICIT
    return value


def _term_to_disk(value: object, null_as: object) -> object:
    return null_as if value is IMPLICIT else value


def _check_term_presence(sentence_text: str, quad: SentimentQuad, line: int) -> int:
    """Warn when an explicit term is not a substring of the sentence."""
    missing = 0
    haystack = normalize_text(sentence_text)
    for label, term in (("aspect", quad.aspect_term), ("opinion", quad.opinion_term)):
        if term is IMPLICIT:
            continue
        if normalize_text(term) not in haystack:
            logger.warning("line %d: %s term %r not found in sentence text", line, label, term)
            missing += 1
    return missing


def _parse_quad_line(line: str, lineno: int) -> LabeledSentence:
    sep = line.find("####")
    if sep < 0:
        raise ParseError("missing '####' separator", lineno)
    text = line[:sep]
    raw = line[sep + 4 :]
    try:
        payload = ast.literal_eval(raw)
    except (SyntaxError, ValueError) as exc:
        column = sep + 4 + (getattr(exc, "offset", None) or 1)
        raise ParseError(f"bad quad list: {exc}", lineno, column) from exc
    if not isinstance(payload, (list, tuple)):
        raise ParseError("quad payload must be a list", lineno, sep + 5)
    quads = []
    for entry in payload:
        if not isinstance(entry, (list, tuple)) or len(entry) != 4:
            raise ParseError(f"quad entry {entry!r} must have 4 elements", lineno, sep + 5)
        at, ac, sp_word, ot = entry
        if not all(isinstance(v, str) for v in entry):
            raise ParseError(f"quad entry {entry!r} must contain strings", lineno, sep + 5)
        polarity = _POLARITY_WORDS.get(sp_word.lower())
        if polarity is None:
            raise ParseError(f"unknown polarity word {sp_word!r}", lineno, sep + 5)
        quads.append(
            SentimentQuad(
                aspect_term=_term_from_disk(at),
                opinion_term=_term_from_disk(ot),
                aspect_category=ac,
                sentiment_polarity=polarity,
            )
        )
    return LabeledSentence(id=str(lineno), text=text, quads=tuple(quads))


def _parse_jsonl_line(line: str, lineno: int) -> LabeledSentence:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad JSON: {exc.msg}", lineno, exc.colno) from exc
    if not isinstance(obj, dict) or "text" not in obj:
        raise ParseError("object must carry a 'text' field", lineno)
    quads = []
    for entry in obj.get("quads", []):
        try:
            polarity = Polarity[entry["sp"]] if entry["sp"] in Polarity.__members__ else _POLARITY_WORDS[entry["sp"].lower()]
            quads.append(
                SentimentQuad(
                    aspect_term=_term_from_disk(entry.get("at")),
                    opinion_term=_term_from_disk(entry.get("ot")),
                    aspect_category=entry["ac"],
                    sentiment_polarity=polarity,
                )
            )
        except (KeyError, TypeError, AttributeError, ValueError) as exc:
            raise ParseError(f"bad quad object {entry!r}: {exc}", lineno) from exc
    return LabeledSentence(id=str(obj.get("id", lineno)), text=obj["text"], quads=tuple(quads))


def load(path: str | Path, format: str = "quad-lines", name: str | None = None) -> Dataset:
    """Read a dataset file.

    Raises:
        ParseError: with line (and column where known) on malformed input.
        EmptyFile: when the file holds no sentences.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    path = Path(path)
    parse_line = _parse_quad_line if format == "quad-lines" else _parse_jsonl_line
    sentences: list[LabeledSentence] = []
    with path.open("r", encoding="utf8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            sentence = parse_line(line, lineno)
            for quad in sentence.quads:
                _check_term_presence(sentence.text, quad, lineno)
            sentences.append(sentence)
    if not sentences:
        raise EmptyFile(f"{path} holds no sentences")
    return Dataset(name=name or path.stem, sentences=tuple(sentences))


def save(dataset: Dataset, path: str | Path, format: str = "quad-lines") -> None:
    """Write a dataset in the given format (inverse of :func:`load`)."""
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    path = Path(path)
    with path.open("w", encoding="utf8") as handle:
        for sentence in dataset:
            if format == "quad-lines":
                payload = [
                    [
                        _term_to_disk(q.aspect_term, "NULL"),
                        q.aspect_category,
                        q.sentiment_polarity.value,
                        _term_to_disk(q.opinion_term, "NULL"),
                    ]
                    for q in sentence.quads
                ]
                handle.write(f"{sentence.text}####{payload!r}\n")
            else:
                obj = {
                    "id": sentence.id,
                    "text": sentence.text,
                    "quads": [
                        {
                            "at": _term_to_disk(q.aspect_term, None),
                            "ot": _term_to_disk(q.opinion_term, None),
                            "ac": q.aspect_category,
                            "sp": q.sentiment_polarity.value,
                        }
                        for q in sentence.quads
                    ],
                }
                handle.write(json.dumps(obj, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class DatasetStats:
    """Corpus statistics: sentence, word, quad, and category counts."""

    num_sentences: int
    num_words: int
    words_per_sentence: float
    num_quads: int
    quads_per_sentence: float
    num_categories: int
    mean_instances_per_category: float
    ea_eo: int
    ia_eo: int
    ea_io: int
    ia_io: int

    def __post_init__(self) -> None:
        if self.ea_eo + self.ia_eo + self.ea_io + self.ia_io != self.num_quads:
            raise ValueError("quadrant counts must sum to the quad count")

    HEADER = (
        "#S",
        "#W",
        "#W/S",
        "EA&EO",
        "IA&EO",
        "EA&IO",
        "IA&IO",
        "#Q",
        "#Q/S",
        "#C",
        "#M(C)",
    )

    def to_row(self) -> tuple:
        return (
            self.num_sentences,
            self.num_words,
            round(self.words_per_sentence, 2),
            self.ea_eo,
            self.ia_eo,
            self.ea_io,
            self.ia_io,
            self.num_quads,
            round(self.quads_per_sentence, 2),
            self.num_categories,
            round(self.mean_instances_per_category, 2),
        )


def stats(dataset: Dataset) -> DatasetStats:
    """Compute corpus statistics; words are whitespace tokens of the raw text.

    ``mean_instances_per_category`` counts, per category, the sentences in
    which it occurs (the unit the few-shot sampler draws), averaged over
    categories.
    """
    if not len(dataset):
        raise ValueError("dataset is empty")
    num_words = sum(len(s.text.split()) for s in dataset)
    num_quads = sum(len(s.quads) for s in dataset)
    quadrants = {"ea_eo": 0, "ia_eo": 0, "ea_io": 0, "ia_io": 0}
    instances_per_category: dict[str, int] = {}
    for sentence in dataset:
        for category in sentence.categories:
            instances_per_category[category] = instances_per_category.get(category, 0) + 1
        for quad in sentence.quads:
            key = ("ia" if quad.aspect_implicit else "ea") + "_" + ("io" if quad.opinion_implicit else "eo")
            quadrants[key] += 1
    num_categories = len(instances_per_category)
    mean_instances = (
        sum(instances_per_category.values()) / num_categories if num_categories else 0.0
    )
    n = len(dataset)
    return DatasetStats(
        num_sentences=n,
        num_words=num_words,
        words_per_sentence=num_words / n,
        num_quads=num_quads,
        quads_per_sentence=num_quads / n,
        num_categories=num_categories,
        mean_instances_per_category=mean_instances,
        **quadrants,
    )


def category_histogram(dataset: Dataset, buckets: Sequence[tuple[int, int]]) -> list[int]:
    """Count categories whose instance count falls in each inclusive bucket.

    Raises:
        InvalidBuckets: on empty, overlapping, gapped, or non-covering buckets.
    """
    if not buckets:
        raise InvalidBuckets("at least one bucket is required")
    ordered = sorted(buckets)
    for lo, hi in ordered:
        if lo > hi:
            raise InvalidBuckets(f"bucket ({lo}, {hi}) has lo > hi")
    for (_, prev_hi), (lo, _) in zip(ordered, ordered[1:]):
        if lo <= prev_hi:
            raise InvalidBuckets("buckets overlap")
        if lo != prev_hi + 1:
            raise InvalidBuckets(f"gap between {prev_hi} and {lo}")

    counts_per_category: dict[str, int] = {}
    for sentence in dataset:
        for category in sentence.categories:
            counts_per_category[category] = counts_per_category.get(category, 0) + 1

    out = [0] * len(buckets)
    index = {bucket: i for i, bucket in enumerate(buckets)}
    for count in counts_per_category.values():
        placed = False
        for lo, hi in ordered:
            if lo <= count <= hi:
                out[index[(lo, hi)]] += 1
                placed = True
                break
        if not placed:
            raise InvalidBuckets(f"category count {count} not covered by any bucket")
    return out


def load_fixture() -> Dataset:
    """The bundled 12-sentence review fixture used by tests and demos."""
    text = resources.files("bvsp").joinpath("data/fixture_reviews.txt").read_text("utf8")
    sentences = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            sentences.append(_parse_quad_line(line, lineno))
    return Dataset(name="fixture_reviews", sentences=tuple(sentences))


def fixture_path() -> Path:
    """Filesystem path of the bundled fixture (for CLI defaults)."""
    with resources.as_file(resources.files("bvsp").joinpath("data/fixture_reviews.txt")) as p:
        return Path(p)
