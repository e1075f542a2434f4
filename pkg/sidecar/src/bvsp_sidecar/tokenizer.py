"""Word-level tokenizer with character spans, and the vocabulary built from data."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

# Whitespace words with punctuation split off; structural markers stay whole.
TOKEN_RE = re.compile(r"\[SSEP\]|\[AT\]|\[OT\]|\[AC\]|\[SP\]|\w+|[^\w\s]")

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


@dataclass(frozen=True)
class Span:
    text: str
    start: int
    end: int


def tokenize(text: str) -> list[Span]:
    return [Span(m.group(), m.start(), m.end()) for m in TOKEN_RE.finditer(text)]


class Vocab:
    """Token/string table; ids 0..3 are the special tokens."""

    def __init__(self, tokens: Sequence[str]):
        self.itos: list[str] = list(SPECIALS) + [t for t in tokens if t not in SPECIALS]
        if len(set(self.itos)) != len(self.itos):
            raise ValueError("vocabulary entries must be unique")
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    @property
    def unk_id(self) -> int:
        return self.stoi[UNK]

    def encode(self, text: str) -> list[int]:
        return [self.stoi.get(span.text, self.unk_id) for span in tokenize(text)]

    def decode(self, ids: Iterable[int]) -> str:
        words = [self.itos[i] for i in ids if self.itos[i] not in (PAD, BOS, EOS)]
        return " ".join(words)

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocab":
        seen: dict[str, None] = {}
        for text in texts:
            for span in tokenize(text):
                seen.setdefault(span.text, None)
        return cls(sorted(seen))

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, tokens: Sequence[str]) -> "Vocab":
        vocab = cls.__new__(cls)
        vocab.itos = list(tokens)
        vocab.stoi = {t: i for i, t in enumerate(vocab.itos)}
        return vocab
