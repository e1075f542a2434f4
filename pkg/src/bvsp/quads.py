"""Core domain types: sentiment quads, their surface projections, and labeled data.

A quad annotates one opinion in a review sentence with four elements:
aspect term, opinion term, aspect category, and sentiment polarity.
Aspect and opinion terms may be implicit (not expressed in the text), which
is represented by the :data:`IMPLICIT` sentinel rather than any string, so a
review that literally mentions the word "it" is never confused with an
implicit aspect.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .errors import UnknownPolaritySurface


class Polarity(Enum):
    """Three-way sentiment label. Values are the on-disk spellings."""

    POS = "positive"
    NEU = "neutral"
    NEG = "negative"


class _ImplicitType:
    """Singleton marker for implicit terms; distinct from every string."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "IMPLICIT"

    def __reduce__(self):
        return (_ImplicitType, ())


IMPLICIT = _ImplicitType()

Term = Union[str, _ImplicitType]

# Surface words used in rendered target sequences.
POLARITY_SURFACE = {
    Polarity.POS: "great",
    Polarity.NEU: "ok",
    Polarity.NEG: "bad",
}
SURFACE_POLARITY = {v: k for k, v in POLARITY_SURFACE.items()}
IMPLICIT_SURFACE = "it"


def _check_term(name: str, value: Term) -> None:
    if value is IMPLICIT:
        return
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"{name} must be a non-empty string or IMPLICIT, got {value!r}")


@dataclass(frozen=True)
class SentimentQuad:
    """One (aspect term, opinion term, aspect category, polarity) annotation."""

    aspect_term: Term
    opinion_term: Term
    aspect_category: str
    sentiment_polarity: Polarity

    def __post_init__(self) -> None:
        _check_term("aspect_term", self.aspect_term)
        _check_term("opinion_term", self.opinion_term)
        if not isinstance(self.aspect_category, str) or not self.aspect_category.strip():
            raise ValueError("aspect_category must be a non-empty string")
        if not isinstance(self.sentiment_polarity, Polarity):
            raise ValueError(f"sentiment_polarity must be a Polarity, got {self.sentiment_polarity!r}")

    @property
    def aspect_implicit(self) -> bool:
        return self.aspect_term is IMPLICIT

    @property
    def opinion_implicit(self) -> bool:
        return self.opinion_term is IMPLICIT


@dataclass(frozen=True)
class SurfaceQuad:
    """Quad after projection to semantic surface values used in target text.

    The implicitness flags remember whether "it" came from an implicit term
    (projection is then losslessly invertible). Parsed model output carries
    no flags (``None``); there "it" is read back as implicit. Flags do not
    participate in equality: two surface quads with the same four strings
    compare equal.
    """

    x_at: str
    x_ot: str
    x_ac: str
    x_sp: str
    aspect_implicit: bool | None = field(default=None, compare=False)
    opinion_implicit: bool | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        for name in ("x_at", "x_ot", "x_ac", "x_sp"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value.strip():
                raise ValueError(f"{name} must be a non-empty string, got {value!r}")
        if self.x_sp not in SURFACE_POLARITY:
            raise ValueError(f"x_sp must be one of {sorted(SURFACE_POLARITY)}, got {self.x_sp!r}")

    def fields(self) -> tuple[str, str, str, str]:
        return (self.x_at, self.x_ot, self.x_ac, self.x_sp)


def project(quad: SentimentQuad) -> SurfaceQuad:
    """Map label values to surface words: POS/NEU/NEG to great/ok/bad, implicit terms to "it"."""
    return SurfaceQuad(
        x_at=IMPLICIT_SURFACE if quad.aspect_implicit else quad.aspect_term,
        x_ot=IMPLICIT_SURFACE if quad.opinion_implicit else quad.opinion_term,
        x_ac=quad.aspect_category,
        x_sp=POLARITY_SURFACE[quad.sentiment_polarity],
        aspect_implicit=quad.aspect_implicit,
        opinion_implicit=quad.opinion_implicit,
    )


def unproject(surface: SurfaceQuad) -> SentimentQuad:
    """Invert :func:`project`.

    When implicitness flags are absent (parsed model output), the surface
    word "it" is read as an implicit term.

    Raises:
        UnknownPolaritySurface: if ``x_sp`` is not great/ok/bad.
    """
    if surface.x_sp not in SURFACE_POLARITY:
        raise UnknownPolaritySurface(f"unknown polarity surface {surface.x_sp!r}")

    def term(value: str, flag: bool | None) -> Term:
        if flag is None:
            return IMPLICIT if value == IMPLICIT_SURFACE else value
        return IMPLICIT if flag else value

    return SentimentQuad(
        aspect_term=term(surface.x_at, surface.aspect_implicit),
        opinion_term=term(surface.x_ot, surface.opinion_implicit),
        aspect_category=surface.x_ac,
        sentiment_polarity=SURFACE_POLARITY[surface.x_sp],
    )


def normalize_text(text: str) -> str:
    """Whitespace-normalize and casefold, the comparison form for quad fields."""
    return " ".join(text.split()).casefold()


def canonical_key(quad: SentimentQuad) -> tuple:
    """Hashable comparison key: case- and whitespace-insensitive, IMPLICIT equals only IMPLICIT."""

    def term_key(value: Term) -> tuple[int, str]:
        if value is IMPLICIT:
            return (0, "")
        return (1, normalize_text(value))

    return (
        term_key(quad.aspect_term),
        term_key(quad.opinion_term),
        normalize_text(quad.aspect_category),
        quad.sentiment_polarity.name,
    )


def canonical_quad(quad: SentimentQuad) -> SentimentQuad:
    """Normalized representative for a quad's equivalence class."""

    def norm(value: Term) -> Term:
        return value if value is IMPLICIT else normalize_text(value)

    return SentimentQuad(
        aspect_term=norm(quad.aspect_term),
        opinion_term=norm(quad.opinion_term),
        aspect_category=normalize_text(quad.aspect_category),
        sentiment_polarity=quad.sentiment_polarity,
    )


def quads_equal(a: SentimentQuad, b: SentimentQuad) -> bool:
    return canonical_key(a) == canonical_key(b)


@dataclass(frozen=True)
class LabeledSentence:
    """A sentence with its gold quads in stable annotation order."""

    id: str
    text: str
    quads: tuple[SentimentQuad, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("sentence id must be a non-empty string")
        object.__setattr__(self, "quads", tuple(self.quads))

    @property
    def categories(self) -> frozenset[str]:
        return frozenset(q.aspect_category for q in self.quads)


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of labeled sentences."""

    name: str
    sentences: tuple[LabeledSentence, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def categories(self) -> tuple[str, ...]:
        """Union of aspect categories over all quads, sorted."""
        seen: set[str] = set()
        for sentence in self.sentences:
            seen.update(sentence.categories)
        return tuple(sorted(seen))

    def by_id(self) -> dict[str, LabeledSentence]:
        return {s.id: s for s in self.sentences}
